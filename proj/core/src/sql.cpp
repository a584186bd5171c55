#include "factscope/sql.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

#include "factscope/error.hpp"
#include "factscope/text_util.hpp"

namespace factscope::sql {

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NOT_SELECT: return "NOT_SELECT";
    case ErrorKind::UNKNOWN_COLUMN: return "UNKNOWN_COLUMN";
    case ErrorKind::UNKNOWN_TABLE: return "UNKNOWN_TABLE";
    case ErrorKind::LIMIT_EXCEEDED: return "LIMIT_EXCEEDED";
    case ErrorKind::SYNTAX: return "SYNTAX";
    case ErrorKind::FORBIDDEN_CLAUSE: return "FORBIDDEN_CLAUSE";
  }
  return "SYNTAX";
}

bool QueryValidationReport::has(ErrorKind code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const ValidationError& e) { return e.code == code; });
}

std::string QueryValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& e : errors) {
    out << to_string(e.code) << " at offset " << e.location << ": " << e.message << '\n';
  }
  return out.str();
}

nlohmann::json QueryValidationReport::to_json() const {
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& e : errors) {
    errs.push_back({{"code", std::string(to_string(e.code))}, {"message", e.message}, {"location", e.location}});
  }
  return {{"ok", ok}, {"errors", errs}};
}

namespace {

constexpr std::size_t kMaxRows = SubTable::kMaxRows;
constexpr std::size_t kMaxFields = SubTable::kMaxFields;

enum class Tok { ident, quoted_ident, string, number, symbol, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
  double number = 0.0;
};

struct Failure {
  ErrorKind code;
  std::string message;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view q) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < q.size()) {
    unsigned char c = static_cast<unsigned char>(q[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < q.size() && q[i + 1] == '-') {  // line comment
      while (i < q.size() && q[i] != '\n') ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(c) || c == '_') {
      while (i < q.size() && (std::isalnum(static_cast<unsigned char>(q[i])) || q[i] == '_')) ++i;
      out.push_back({Tok::ident, std::string(q.substr(start, i - start)), start});
      continue;
    }
    if (std::isdigit(c) || (c == '.' && i + 1 < q.size() && std::isdigit(static_cast<unsigned char>(q[i + 1])))) {
      while (i < q.size() && (std::isdigit(static_cast<unsigned char>(q[i])) || q[i] == '.')) ++i;
      if (i < q.size() && (q[i] == 'e' || q[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < q.size() && (q[j] == '+' || q[j] == '-')) ++j;
        if (j < q.size() && std::isdigit(static_cast<unsigned char>(q[j]))) {
          i = j;
          while (i < q.size() && std::isdigit(static_cast<unsigned char>(q[i]))) ++i;
        }
      }
      std::string t(q.substr(start, i - start));
      auto v = text::parse_number(t);
      if (!v) throw Failure{ErrorKind::SYNTAX, "malformed number '" + t + "'", start};
      out.push_back({Tok::number, t, start, *v});
      continue;
    }
    if (c == '\'') {
      std::string s;
      ++i;
      bool closed = false;
      while (i < q.size()) {
        if (q[i] == '\'') {
          if (i + 1 < q.size() && q[i + 1] == '\'') {
            s.push_back('\'');
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        s.push_back(q[i++]);
      }
      if (!closed) throw Failure{ErrorKind::SYNTAX, "unterminated string literal", start};
      out.push_back({Tok::string, std::move(s), start});
      continue;
    }
    if (c == '"' || c == '`' || c == '[') {
      const char close = c == '[' ? ']' : static_cast<char>(c);
      std::string s;
      ++i;
      bool closed = false;
      while (i < q.size()) {
        if (q[i] == close) {
          if (close != ']' && i + 1 < q.size() && q[i + 1] == close) {
            s.push_back(close);
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        s.push_back(q[i++]);
      }
      if (!closed) throw Failure{ErrorKind::SYNTAX, "unterminated quoted identifier", start};
      out.push_back({Tok::quoted_ident, std::move(s), start});
      continue;
    }
    static const char* two_char[] = {"<>", "!=", "<=", ">=", "||"};
    bool matched = false;
    for (const char* op : two_char) {
      if (q.substr(i, 2) == op) {
        out.push_back({Tok::symbol, op, start});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("=<>(),*;+-/%.").find(static_cast<char>(c)) != std::string_view::npos) {
      out.push_back({Tok::symbol, std::string(1, static_cast<char>(c)), start});
      ++i;
      continue;
    }
    throw Failure{ErrorKind::SYNTAX, std::string("unexpected character '") + static_cast<char>(c) + "'", start};
  }
  out.push_back({Tok::end, "", q.size()});
  return out;
}

const std::set<std::string>& forbidden_keywords() {
  static const std::set<std::string> kw = {
      "group", "having", "join",  "union", "intersect", "except", "with",   "offset", "distinct", "as",
      "inner", "left",   "right", "outer", "cross",     "fetch",  "into",   "case",   "over",     "window",
      "insert", "update", "delete", "drop", "create",   "alter",  "returning", "natural", "using", "top"};
  return kw;
}

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> kw = {"select", "from", "where", "order", "by",   "limit", "and",  "or",
                                           "not",    "in",   "like",  "is",    "null", "asc",   "desc", "between"};
  return kw;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SelectStatement parse_statement() {
    const Token& first = peek();
    if (first.kind == Tok::end) throw Failure{ErrorKind::SYNTAX, "empty query", 0};
    if (!is_kw(first, "select")) {
      throw Failure{ErrorKind::NOT_SELECT, "only a single SELECT statement is allowed, found '" + first.text + "'",
                    first.offset};
    }
    advance();
    SelectStatement st;
    parse_select_list(st);
    expect_kw("from");
    const Token& table = peek();
    if (!is_identifier(table)) throw Failure{ErrorKind::SYNTAX, "expected table name after FROM", table.offset};
    st.table = table.text;
    st.table_offset = table.offset;
    advance();
    if (peek().kind == Tok::symbol && peek().text == ",") {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "queries may read from a single table only", peek().offset};
    }
    if (peek().kind == Tok::symbol && peek().text == ".") {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "qualified table names are not supported", peek().offset};
    }
    if (is_kw(peek(), "where")) {
      advance();
      st.where = parse_or();
    }
    if (is_kw(peek(), "order")) {
      advance();
      expect_kw("by");
      do {
        OrderKey key;
        key.column = parse_column("ORDER BY");
        if (is_kw(peek(), "asc")) {
          advance();
        } else if (is_kw(peek(), "desc")) {
          key.descending = true;
          advance();
        }
        st.order_by.push_back(std::move(key));
      } while (accept_symbol(","));
    }
    if (is_kw(peek(), "limit")) {
      advance();
      const Token& n = peek();
      if (n.kind != Tok::number || n.number != static_cast<double>(static_cast<long long>(n.number)) || n.number < 0) {
        throw Failure{ErrorKind::SYNTAX, "LIMIT expects a non-negative integer", n.offset};
      }
      st.limit = static_cast<long long>(n.number);
      st.limit_offset = n.offset;
      advance();
      if (accept_symbol(",")) throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "LIMIT offset form is not allowed", n.offset};
    }
    if (accept_symbol(";")) {
      if (peek().kind != Tok::end) {
        throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "multiple statements are not allowed", peek().offset};
      }
    }
    if (peek().kind != Tok::end) {
      const Token& t = peek();
      if (t.kind == Tok::ident && forbidden_keywords().count(text::to_lower(t.text))) {
        throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "clause '" + t.text + "' is not allowed", t.offset};
      }
      throw Failure{ErrorKind::SYNTAX, "unexpected '" + t.text + "'", t.offset};
    }
    return st;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  void advance() {
    if (pos_ < toks_.size() - 1) ++pos_;
  }
  static bool is_kw(const Token& t, std::string_view kw) { return t.kind == Tok::ident && text::iequals(t.text, kw); }
  static bool is_identifier(const Token& t) {
    if (t.kind == Tok::quoted_ident) return true;
    return t.kind == Tok::ident && !reserved_words().count(text::to_lower(t.text)) &&
           !forbidden_keywords().count(text::to_lower(t.text));
  }
  bool accept_symbol(std::string_view s) {
    if (peek().kind == Tok::symbol && peek().text == s) {
      advance();
      return true;
    }
    return false;
  }
  void expect_symbol(std::string_view s) {
    if (!accept_symbol(s)) {
      throw Failure{ErrorKind::SYNTAX, "expected '" + std::string(s) + "'", peek().offset};
    }
  }
  void expect_kw(std::string_view kw) {
    if (!is_kw(peek(), kw)) {
      const Token& t = peek();
      if (t.kind == Tok::ident && forbidden_keywords().count(text::to_lower(t.text))) {
        throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "clause '" + t.text + "' is not allowed", t.offset};
      }
      throw Failure{ErrorKind::SYNTAX, "expected " + text::to_lower(kw) + ", found '" + t.text + "'", t.offset};
    }
    advance();
  }

  void reject_calculation(const Token& after_column) {
    if (after_column.kind == Tok::symbol &&
        (after_column.text == "+" || after_column.text == "-" || after_column.text == "*" ||
         after_column.text == "/" || after_column.text == "%" || after_column.text == "||")) {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "calculations are not allowed", after_column.offset};
    }
  }

  ColumnRef parse_column(std::string_view context) {
    const Token& t = peek();
    if (t.kind == Tok::ident && forbidden_keywords().count(text::to_lower(t.text))) {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "clause '" + t.text + "' is not allowed", t.offset};
    }
    if (!is_identifier(t)) {
      throw Failure{ErrorKind::SYNTAX, "expected a column name in " + std::string(context), t.offset};
    }
    if (peek(1).kind == Tok::symbol && peek(1).text == "(") {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "function call '" + t.text + "(...)' is not allowed", t.offset};
    }
    ColumnRef ref{t.text, t.offset};
    advance();
    if (peek().kind == Tok::symbol && peek().text == ".") {
      // table.column qualifier: keep the column part
      advance();
      const Token& col = peek();
      if (!is_identifier(col)) throw Failure{ErrorKind::SYNTAX, "expected column after '.'", col.offset};
      ref = ColumnRef{col.text, col.offset};
      advance();
    }
    reject_calculation(peek());
    if (is_kw(peek(), "as")) throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "column aliases are not allowed", peek().offset};
    return ref;
  }

  void parse_select_list(SelectStatement& st) {
    if (is_kw(peek(), "distinct")) throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "DISTINCT is not allowed", peek().offset};
    if (accept_symbol("*")) {
      st.select_all = true;
      return;
    }
    do {
      const Token& t = peek();
      if (t.kind == Tok::number || t.kind == Tok::string) {
        throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "literal expressions are not allowed in the select list", t.offset};
      }
      st.columns.push_back(parse_column("select list"));
    } while (accept_symbol(","));
  }

  Literal parse_literal() {
    bool negative = false;
    if (peek().kind == Tok::symbol && (peek().text == "-" || peek().text == "+")) {
      negative = peek().text == "-";
      advance();
      if (peek().kind != Tok::number) throw Failure{ErrorKind::SYNTAX, "expected a number after sign", peek().offset};
    }
    const Token& t = peek();
    if (t.kind == Tok::number) {
      advance();
      reject_calculation(peek());
      return negative ? -t.number : t.number;
    }
    if (t.kind == Tok::string) {
      advance();
      reject_calculation(peek());
      return t.text;
    }
    if (is_identifier(t) || t.kind == Tok::quoted_ident) {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "comparisons must be between a column and a literal", t.offset};
    }
    if (t.kind == Tok::ident && peek(1).kind == Tok::symbol && peek(1).text == "(") {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "function call '" + t.text + "(...)' is not allowed", t.offset};
    }
    if (t.kind == Tok::symbol && t.text == "(" && is_kw(peek(1), "select")) {
      throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "subqueries are not allowed", t.offset};
    }
    throw Failure{ErrorKind::SYNTAX, "expected a literal, found '" + t.text + "'", t.offset};
  }

  PredicatePtr make(auto node) {
    auto p = std::make_unique<Predicate>();
    p->node = std::move(node);
    return p;
  }

  PredicatePtr parse_or() {
    auto lhs = parse_and();
    while (is_kw(peek(), "or")) {
      advance();
      auto rhs = parse_and();
      lhs = make(Logical{Logical::Op::disj, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  PredicatePtr parse_and() {
    auto lhs = parse_unary();
    while (is_kw(peek(), "and")) {
      advance();
      auto rhs = parse_unary();
      lhs = make(Logical{Logical::Op::conj, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  PredicatePtr parse_unary() {
    if (is_kw(peek(), "not")) {
      advance();
      return make(Negation{parse_unary()});
    }
    if (peek().kind == Tok::symbol && peek().text == "(") {
      if (is_kw(peek(1), "select")) throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "subqueries are not allowed", peek().offset};
      advance();
      auto inner = parse_or();
      expect_symbol(")");
      return inner;
    }
    return parse_atom();
  }

  static std::optional<CompareOp> compare_op(const Token& t) {
    if (t.kind != Tok::symbol) return std::nullopt;
    if (t.text == "=") return CompareOp::eq;
    if (t.text == "<>" || t.text == "!=") return CompareOp::ne;
    if (t.text == "<") return CompareOp::lt;
    if (t.text == ">") return CompareOp::gt;
    if (t.text == "<=") return CompareOp::le;
    if (t.text == ">=") return CompareOp::ge;
    return std::nullopt;
  }

  static CompareOp flip(CompareOp op) {
    switch (op) {
      case CompareOp::lt: return CompareOp::gt;
      case CompareOp::gt: return CompareOp::lt;
      case CompareOp::le: return CompareOp::ge;
      case CompareOp::ge: return CompareOp::le;
      default: return op;
    }
  }

  PredicatePtr parse_atom() {
    // literal op column
    if (peek().kind == Tok::number || peek().kind == Tok::string ||
        (peek().kind == Tok::symbol && (peek().text == "-" || peek().text == "+"))) {
      Literal lit = parse_literal();
      auto op = compare_op(peek());
      if (!op) throw Failure{ErrorKind::SYNTAX, "expected a comparison operator", peek().offset};
      advance();
      ColumnRef col = parse_column("WHERE");
      return make(Comparison{std::move(col), flip(*op), std::move(lit)});
    }

    ColumnRef col = parse_column("WHERE");
    if (auto op = compare_op(peek())) {
      advance();
      return make(Comparison{std::move(col), *op, parse_literal()});
    }
    bool negated = false;
    if (is_kw(peek(), "not")) {
      negated = true;
      advance();
    }
    if (is_kw(peek(), "in")) {
      advance();
      expect_symbol("(");
      if (is_kw(peek(), "select")) throw Failure{ErrorKind::FORBIDDEN_CLAUSE, "subqueries are not allowed", peek().offset};
      InList in{std::move(col), {}, negated};
      do {
        in.values.push_back(parse_literal());
      } while (accept_symbol(","));
      expect_symbol(")");
      return make(std::move(in));
    }
    if (is_kw(peek(), "like")) {
      advance();
      const Token& pat = peek();
      if (pat.kind != Tok::string) throw Failure{ErrorKind::SYNTAX, "LIKE expects a string pattern", pat.offset};
      advance();
      return make(Like{std::move(col), pat.text, negated});
    }
    if (is_kw(peek(), "between")) {
      advance();
      Literal lo = parse_literal();
      expect_kw("and");
      Literal hi = parse_literal();
      auto range = make(Logical{Logical::Op::conj, make(Comparison{col, CompareOp::ge, std::move(lo)}),
                                make(Comparison{col, CompareOp::le, std::move(hi)})});
      return negated ? make(Negation{std::move(range)}) : std::move(range);
    }
    if (negated) throw Failure{ErrorKind::SYNTAX, "expected IN, LIKE or BETWEEN after NOT", peek().offset};
    if (is_kw(peek(), "is")) {
      advance();
      bool is_not = false;
      if (is_kw(peek(), "not")) {
        is_not = true;
        advance();
      }
      expect_kw("null");
      return make(IsNull{std::move(col), is_not});
    }
    throw Failure{ErrorKind::SYNTAX, "expected a comparison after column '" + col.name + "'", peek().offset};
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void collect_columns(const Predicate& p, std::vector<const ColumnRef*>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Logical>) {
          collect_columns(*n.lhs, out);
          collect_columns(*n.rhs, out);
        } else if constexpr (std::is_same_v<T, Negation>) {
          collect_columns(*n.operand, out);
        } else {
          out.push_back(&n.column);
        }
      },
      p.node);
}

}  // namespace

ParseResult parse(std::string_view query) {
  ParseResult result;
  try {
    Parser parser(lex(query));
    result.statement = parser.parse_statement();
  } catch (const Failure& f) {
    result.report.add(f.code, f.message, f.offset);
  }
  return result;
}

QueryValidationReport validate_query(std::string_view query, const Dataset& dataset) {
  ParseResult parsed = parse(query);
  QueryValidationReport report = std::move(parsed.report);
  if (!parsed.statement) return report;
  const SelectStatement& st = *parsed.statement;

  if (!text::iequals(st.table, dataset.id) && !text::iequals(st.table, dataset.name)) {
    report.add(ErrorKind::UNKNOWN_TABLE, "unknown table '" + st.table + "', expected '" + dataset.id + "'",
               st.table_offset);
  }

  std::vector<const ColumnRef*> refs;
  for (const auto& c : st.columns) refs.push_back(&c);
  if (st.where) collect_columns(*st.where, refs);
  for (const auto& k : st.order_by) refs.push_back(&k.column);
  for (const ColumnRef* ref : refs) {
    if (!dataset.field_index(ref->name)) {
      report.add(ErrorKind::UNKNOWN_COLUMN, "column '" + ref->name + "' does not exist", ref->offset);
    }
  }

  std::set<std::size_t> projected;
  for (const auto& c : st.columns) {
    auto idx = dataset.field_index(c.name);
    if (idx && !projected.insert(*idx).second) {
      report.add(ErrorKind::FORBIDDEN_CLAUSE, "column '" + c.name + "' selected twice", c.offset);
    }
  }
  const std::size_t width = st.select_all ? dataset.fields.size() : st.columns.size();
  if (width > kMaxFields) {
    report.add(ErrorKind::LIMIT_EXCEEDED,
               "query selects " + std::to_string(width) + " columns, at most " + std::to_string(kMaxFields) +
                   " are allowed",
               0);
  }
  if (st.limit && *st.limit > static_cast<long long>(kMaxRows)) {
    report.add(ErrorKind::LIMIT_EXCEEDED,
               "LIMIT " + std::to_string(*st.limit) + " exceeds " + std::to_string(kMaxRows) + " rows",
               st.limit_offset);
  }
  return report;
}

bool like_match(std::string_view value, std::string_view pattern) {
  // Iterative wildcard match with single backtrack point for '%'.
  std::size_t v = 0, p = 0, star_p = std::string_view::npos, star_v = 0;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  while (v < value.size()) {
    if (p < pattern.size() && (pattern[p] == '_' || (pattern[p] != '%' && eq(pattern[p], value[v])))) {
      ++v;
      ++p;
    } else if (p < pattern.size() && pattern[p] == '%') {
      star_p = p++;
      star_v = v;
    } else if (star_p != std::string_view::npos) {
      p = star_p + 1;
      v = ++star_v;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '%') ++p;
  return p == pattern.size();
}

std::string quote_literal(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

namespace {

enum class Truth { no, yes, unknown };

Truth truth(bool b) { return b ? Truth::yes : Truth::no; }

class Evaluator {
 public:
  explicit Evaluator(const Dataset& d) : d_(d) {}

  // Static type check of every predicate against the column kinds.
  void check_types(const Predicate& p) const {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Logical>) {
            check_types(*n.lhs);
            check_types(*n.rhs);
          } else if constexpr (std::is_same_v<T, Negation>) {
            check_types(*n.operand);
          } else if constexpr (std::is_same_v<T, Comparison>) {
            check_literal(n.column, n.value, n.op == CompareOp::eq || n.op == CompareOp::ne);
          } else if constexpr (std::is_same_v<T, InList>) {
            for (const auto& v : n.values) check_literal(n.column, v, true);
          }
        },
        p.node);
  }

  Truth eval(const Predicate& p, const Row& row) const {
    return std::visit(
        [&](const auto& n) -> Truth {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Logical>) {
            Truth a = eval(*n.lhs, row);
            Truth b = eval(*n.rhs, row);
            if (n.op == Logical::Op::conj) {
              if (a == Truth::no || b == Truth::no) return Truth::no;
              if (a == Truth::yes && b == Truth::yes) return Truth::yes;
              return Truth::unknown;
            }
            if (a == Truth::yes || b == Truth::yes) return Truth::yes;
            if (a == Truth::no && b == Truth::no) return Truth::no;
            return Truth::unknown;
          } else if constexpr (std::is_same_v<T, Negation>) {
            Truth a = eval(*n.operand, row);
            return a == Truth::unknown ? a : truth(a == Truth::no);
          } else if constexpr (std::is_same_v<T, Comparison>) {
            return compare(cell(row, n.column), n.op, n.value);
          } else if constexpr (std::is_same_v<T, InList>) {
            const Cell& c = cell(row, n.column);
            if (is_null(c)) return Truth::unknown;
            bool any = false;
            for (const auto& v : n.values) {
              if (compare(c, CompareOp::eq, v) == Truth::yes) any = true;
            }
            return truth(any != n.negated);
          } else if constexpr (std::is_same_v<T, Like>) {
            const Cell& c = cell(row, n.column);
            if (is_null(c)) return Truth::unknown;
            return truth(like_match(cell_text(c), n.pattern) != n.negated);
          } else {
            return truth(is_null(cell(row, n.column)) != n.negated);
          }
        },
        p.node);
  }

 private:
  const Cell& cell(const Row& row, const ColumnRef& ref) const { return row[*d_.field_index(ref.name)]; }

  void check_literal(const ColumnRef& ref, const Literal& lit, bool equality) const {
    const FieldDescriptor& f = d_.fields[*d_.field_index(ref.name)];
    const auto* s = std::get_if<std::string>(&lit);
    const bool numeric_literal = !s || text::parse_number(*s).has_value();
    auto mismatch = [&](const std::string& why) {
      throw Error(ErrorCode::EXECUTION_FAILURE,
                  "type mismatch on column '" + f.name + "': " + why,
                  {{"column", f.name}, {"offset", ref.offset}});
    };
    switch (f.kind) {
      case FieldKind::numerical:
        if (!numeric_literal) mismatch("numerical column compared with text '" + *s + "'");
        break;
      case FieldKind::temporal:
        if (!numeric_literal && !(s && s->size() == 10 && (*s)[4] == '-')) {
          mismatch("temporal column compared with '" + *s + "'");
        }
        break;
      case FieldKind::categorical:
        if (!s && !equality) mismatch("categorical column ordered against a number");
        break;
    }
  }

  static Truth compare(const Cell& c, CompareOp op, const Literal& lit) {
    if (is_null(c)) return Truth::unknown;
    int cmp = 0;
    if (const auto* num = std::get_if<double>(&c)) {
      std::optional<double> rhs;
      if (const auto* d = std::get_if<double>(&lit)) rhs = *d;
      else rhs = text::parse_number(std::get<std::string>(lit));
      if (!rhs) return Truth::unknown;
      cmp = *num < *rhs ? -1 : (*num > *rhs ? 1 : 0);
    } else {
      const auto& s = std::get<std::string>(c);
      if (const auto* ls = std::get_if<std::string>(&lit)) {
        cmp = s.compare(*ls);
        cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
      } else {
        auto lhs = text::parse_number(s);
        if (!lhs) return op == CompareOp::ne ? Truth::yes : (op == CompareOp::eq ? Truth::no : Truth::unknown);
        double rhs = std::get<double>(lit);
        cmp = *lhs < rhs ? -1 : (*lhs > rhs ? 1 : 0);
      }
    }
    switch (op) {
      case CompareOp::eq: return truth(cmp == 0);
      case CompareOp::ne: return truth(cmp != 0);
      case CompareOp::lt: return truth(cmp < 0);
      case CompareOp::gt: return truth(cmp > 0);
      case CompareOp::le: return truth(cmp <= 0);
      case CompareOp::ge: return truth(cmp >= 0);
    }
    return Truth::unknown;
  }

  const Dataset& d_;
};

}  // namespace

SubTable execute_query(std::string_view query, const Dataset& dataset) {
  QueryValidationReport report = validate_query(query, dataset);
  if (!report.ok) {
    throw Error(ErrorCode::EXECUTION_FAILURE, "query failed validation: " + report.summary(), report.to_json());
  }
  SelectStatement st = std::move(*parse(query).statement);
  Evaluator eval(dataset);
  if (st.where) eval.check_types(*st.where);

  std::vector<std::size_t> matched;
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    if (!st.where || eval.eval(*st.where, dataset.rows[r]) == Truth::yes) matched.push_back(r);
  }

  if (!st.order_by.empty()) {
    std::vector<std::pair<std::size_t, bool>> keys;
    for (const auto& k : st.order_by) keys.emplace_back(*dataset.field_index(k.column.name), k.descending);
    std::stable_sort(matched.begin(), matched.end(), [&](std::size_t a, std::size_t b) {
      for (const auto& [col, desc] : keys) {
        int c = compare_cells(dataset.rows[a][col], dataset.rows[b][col]);
        if (c != 0) return desc ? c > 0 : c < 0;
      }
      return false;
    });
  }

  const std::size_t limit = st.limit ? static_cast<std::size_t>(*st.limit) : kMaxRows;
  if (matched.size() > limit) matched.resize(limit);

  std::vector<std::size_t> cols;
  if (st.select_all) {
    cols.resize(dataset.fields.size());
    std::iota(cols.begin(), cols.end(), 0);
  } else {
    for (const auto& c : st.columns) cols.push_back(*dataset.field_index(c.name));
  }

  SubTable out;
  out.source_dataset = dataset.id;
  out.generating_query = std::string(query);
  for (std::size_t c : cols) out.fields.push_back(dataset.fields[c]);
  for (std::size_t r : matched) {
    Row row;
    row.reserve(cols.size());
    for (std::size_t c : cols) row.push_back(dataset.rows[r][c]);
    out.rows.push_back(std::move(row));
    out.source_rows.push_back(r);
  }
  return out;
}

}  // namespace factscope::sql
