#include "sql_fuzz.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <sstream>

namespace oracle {

using namespace factscope;

namespace {

enum class T { no, yes, unknown };

const char* kWords[] = {"alpha", "beta", "gamma", "delta", "Alpha", "o'neil"};

std::string sql_string(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  return out + "'";
}

std::string number_text(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

bool like(const std::string& v, const std::string& p) {
  // recursive matcher, ASCII case-insensitive
  std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> bool {
    if (j == p.size()) return i == v.size();
    if (p[j] == '%') return go(i, j + 1) || (i < v.size() && go(i + 1, j));
    if (i == v.size()) return false;
    if (p[j] == '_' || std::tolower(static_cast<unsigned char>(p[j])) == std::tolower(static_cast<unsigned char>(v[i]))) {
      return go(i + 1, j + 1);
    }
    return false;
  };
  return go(0, 0);
}

struct Gen {
  std::mt19937_64& rng;
  const Dataset& d;

  std::size_t col() { return rng() % d.fields.size(); }
  bool numeric(std::size_t c) const { return d.fields[c].kind == FieldKind::numerical; }

  double any_number(std::size_t c) {
    for (int tries = 0; tries < 4; ++tries) {
      const Cell& x = d.rows[rng() % d.rows.size()][c];
      if (const auto* v = std::get_if<double>(&x)) return *v;
    }
    return static_cast<double>(static_cast<int>(rng() % 200) - 50);
  }
  std::string any_word(std::size_t c) {
    const Cell& x = d.rows[rng() % d.rows.size()][c];
    if (const auto* s = std::get_if<std::string>(&x)) return *s;
    return kWords[rng() % 6];
  }

  // Returns SQL text and the row evaluator.
  std::pair<std::string, std::function<T(const Row&)>> pred(int depth) {
    const auto pick = rng() % (depth > 2 ? 4 : 7);
    const std::size_t c = col();
    const std::string name = d.fields[c].name;
    if (pick == 0) {  // comparison
      static const char* ops[] = {"=", "<>", "!=", "<", ">", "<=", ">="};
      const int op = numeric(c) ? static_cast<int>(rng() % 7) : static_cast<int>(rng() % 3);
      std::string lit;
      std::function<int(const Cell&)> cmp;
      if (numeric(c)) {
        const double v = any_number(c);
        lit = number_text(v);
        cmp = [v](const Cell& x) { double a = std::get<double>(x); return a < v ? -1 : (a > v ? 1 : 0); };
      } else {
        const std::string v = any_word(c);
        lit = sql_string(v);
        cmp = [v](const Cell& x) { int r = std::get<std::string>(x).compare(v); return r < 0 ? -1 : (r > 0 ? 1 : 0); };
      }
      auto f = [c, op, cmp](const Row& r) {
        if (std::holds_alternative<std::monostate>(r[c])) return T::unknown;
        const int k = cmp(r[c]);
        bool b = false;
        switch (op) {
          case 0: b = k == 0; break;
          case 1: case 2: b = k != 0; break;
          case 3: b = k < 0; break;
          case 4: b = k > 0; break;
          case 5: b = k <= 0; break;
          default: b = k >= 0; break;
        }
        return b ? T::yes : T::no;
      };
      return {name + " " + ops[op] + " " + lit, f};
    }
    if (pick == 1) {  // IN list
      const bool neg = rng() % 3 == 0;
      std::vector<Cell> vals;
      std::string text = name + (neg ? " NOT IN (" : " IN (");
      const std::size_t k = 1 + rng() % 3;
      for (std::size_t i = 0; i < k; ++i) {
        if (i) text += ", ";
        if (numeric(c)) {
          double v = any_number(c);
          vals.emplace_back(v);
          text += number_text(v);
        } else {
          std::string v = any_word(c);
          vals.emplace_back(v);
          text += sql_string(v);
        }
      }
      text += ")";
      auto f = [c, vals, neg](const Row& r) {
        if (std::holds_alternative<std::monostate>(r[c])) return T::unknown;
        bool any = std::any_of(vals.begin(), vals.end(), [&](const Cell& v) { return v == r[c]; });
        return (any != neg) ? T::yes : T::no;
      };
      return {text, f};
    }
    if (pick == 2) {  // LIKE over text columns, IS NULL otherwise
      if (!numeric(c)) {
        static const char* pats[] = {"a%", "%a", "%ET%", "_lpha", "%", "g_mma", "%'%"};
        const std::string p = pats[rng() % 7];
        const bool neg = rng() % 3 == 0;
        auto f = [c, p, neg](const Row& r) {
          if (std::holds_alternative<std::monostate>(r[c])) return T::unknown;
          return (like(std::get<std::string>(r[c]), p) != neg) ? T::yes : T::no;
        };
        return {name + (neg ? " NOT LIKE " : " LIKE ") + sql_string(p), f};
      }
      const bool neg = rng() % 2 == 0;
      auto f = [c, neg](const Row& r) {
        return (std::holds_alternative<std::monostate>(r[c]) != neg) ? T::yes : T::no;
      };
      return {name + (neg ? " IS NOT NULL" : " IS NULL"), f};
    }
    if (pick == 3) {
      auto [t, f] = pred(depth + 1);
      return {"(" + t + ")", f};
    }
    if (pick == 4) {
      auto [t, f] = pred(depth + 1);
      auto g = [f](const Row& r) {
        T a = f(r);
        return a == T::unknown ? a : (a == T::yes ? T::no : T::yes);
      };
      return {"NOT (" + t + ")", g};
    }
    auto [ta, fa] = pred(depth + 1);
    auto [tb, fb] = pred(depth + 1);
    const bool conj = pick == 5;
    auto g = [fa, fb, conj](const Row& r) {
      T a = fa(r), b = fb(r);
      if (conj) {
        if (a == T::no || b == T::no) return T::no;
        return (a == T::yes && b == T::yes) ? T::yes : T::unknown;
      }
      if (a == T::yes || b == T::yes) return T::yes;
      return (a == T::no && b == T::no) ? T::no : T::unknown;
    };
    return {"(" + ta + (conj ? " AND " : " OR ") + tb + ")", g};
  }
};

int order_cells(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return *x < y ? -1 : (*x > y ? 1 : 0);
  }
  if (const auto* s = std::get_if<std::string>(&a)) {
    const int c = s->compare(std::get<std::string>(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  return 0;
}

}  // namespace

Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Dataset d;
  d.id = "fuzz";
  d.name = "fuzz";
  for (std::size_t c = 0; c < cols; ++c) {
    FieldDescriptor f;
    f.name = (c % 2 == 0 ? "t" : "n") + std::to_string(c);
    f.kind = c % 2 == 0 ? FieldKind::categorical : FieldKind::numerical;
    f.dataset_id = d.id;
    d.fields.push_back(f);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    Row row;
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng() % 8 == 0) row.emplace_back(std::monostate{});
      else if (c % 2 == 0) row.emplace_back(std::string(kWords[rng() % 6]));
      else row.emplace_back(static_cast<double>(static_cast<int>(rng() % 40) - 10));
    }
    d.rows.push_back(std::move(row));
  }
  return d;
}

FuzzQuery random_query(std::mt19937_64& rng, const Dataset& d) {
  Gen g{rng, d};
  FuzzQuery q;
  std::string text = "SELECT ";
  const auto shape = rng() % 8;
  if (shape == 0) {
    text += "*";
    for (std::size_t c = 0; c < d.fields.size(); ++c) q.columns.push_back(c);
  } else {
    const std::size_t k = 1 + rng() % std::min<std::size_t>(d.fields.size(), 6);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t c = g.col();
      if (std::find(q.columns.begin(), q.columns.end(), c) != q.columns.end()) continue;
      text += (q.columns.empty() ? "" : ", ") + d.fields[c].name;
      q.columns.push_back(c);
    }
  }
  if (q.columns.size() > SubTable::kMaxFields) q.valid = false;
  const bool ghost = rng() % 10 == 0;
  if (ghost) {
    text += ", ghost_column";
    q.valid = false;
  }
  text += " FROM " + d.id;

  std::function<T(const Row&)> where;
  if (rng() % 5 != 0) {
    auto [t, f] = g.pred(0);
    text += " WHERE " + t;
    where = f;
  }
  std::vector<std::pair<std::size_t, bool>> order;
  if (rng() % 3 == 0) {
    const std::size_t c = g.col();
    const bool desc = rng() % 2 == 0;
    order.emplace_back(c, desc);
    text += " ORDER BY " + d.fields[c].name + (desc ? " DESC" : "");
  }
  std::size_t limit = SubTable::kMaxRows;
  if (rng() % 4 != 0) {
    limit = rng() % 14;
    text += " LIMIT " + std::to_string(limit);
    if (limit > SubTable::kMaxRows) q.valid = false;
  }
  q.sql = text;

  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    if (!where || where(d.rows[r]) == T::yes) q.rows.push_back(r);
  }
  // stable insertion sort on the ORDER BY key
  for (const auto& [c, desc] : order) {
    for (std::size_t i = 1; i < q.rows.size(); ++i) {
      for (std::size_t j = i; j > 0; --j) {
        int k = order_cells(d.rows[q.rows[j]][c], d.rows[q.rows[j - 1]][c]);
        if (desc ? k > 0 : k < 0) std::swap(q.rows[j], q.rows[j - 1]);
        else break;
      }
    }
  }
  if (q.rows.size() > limit) q.rows.resize(limit);
  return q;
}

std::string mutate(std::mt19937_64& rng, std::string sql) {
  static const char* inserts[] = {";", "'", "(", ")", " DROP TABLE x", " UNION SELECT 1", "--", " GROUP BY n1",
                                  " COUNT(*)", ",", "\"", " LIMIT 99", " OR ", "\\"};
  const std::size_t edits = 1 + rng() % 3;
  for (std::size_t e = 0; e < edits && !sql.empty(); ++e) {
    const std::size_t pos = rng() % sql.size();
    switch (rng() % 3) {
      case 0: sql.erase(pos, 1 + rng() % 4); break;
      case 1: sql.insert(pos, inserts[rng() % 14]); break;
      default: sql[pos] = static_cast<char>(32 + rng() % 95); break;
    }
  }
  return sql;
}

}  // namespace oracle
