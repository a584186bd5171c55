#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace factscope {

enum class PromptKind { decompose, text2sql, extract, evaluate, plan };
inline constexpr PromptKind kAllPromptKinds[] = {PromptKind::decompose, PromptKind::text2sql, PromptKind::extract,
                                                 PromptKind::evaluate, PromptKind::plan};
std::string_view to_string(PromptKind k);
std::optional<PromptKind> prompt_kind_from_string(std::string_view s);

enum class Stance { support, oppose };
std::string_view to_string(Stance s);
std::optional<Stance> stance_from_string(std::string_view s);
Stance opposite(Stance s);

// Raw template text. Placeholders are written {{name}}; other braces are literal.
std::string_view prompt_template(PromptKind k);

// Substitutes every {{name}}. Throws INVALID_ARGUMENT for a placeholder with
// no value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& vars);

std::string render_decompose(Stance stance, std::string_view query);
std::string render_text2sql(std::string_view table_name, std::string_view columns, std::string_view values,
                            std::string_view query, std::string_view relevant_series);
std::string render_extract(Stance stance, std::string_view data, std::string_view statement,
                           std::string_view query);
std::string render_evaluate(std::string_view facts, std::string_view statement);
std::string render_plan(Stance stance, std::string_view statement, std::string_view queries_facts);

}  // namespace factscope
