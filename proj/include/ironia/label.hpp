#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "ironia/error.hpp"

namespace ironia {

enum class Mode { Multiclass, Binary };

enum class Label { Irony, Negative, Neutral, Positive, NotIrony };

inline constexpr std::array<Label, 4> kMulticlassLabels = {Label::Irony, Label::Negative,
                                                           Label::Neutral, Label::Positive};
// Index order follows the binary encoding: NO_IRONÍA=0, IRONÍA=1.
inline constexpr std::array<Label, 2> kBinaryLabels = {Label::NotIrony, Label::Irony};

constexpr std::string_view to_string(Mode mode) {
  return mode == Mode::Multiclass ? "multiclass" : "binary";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "multiclass") return Mode::Multiclass;
  if (s == "binary") return Mode::Binary;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(s) + "'");
}

/// Canonical accented Spanish form used for storage.
constexpr std::string_view to_string(Label label) {
  switch (label) {
    case Label::Irony: return "IRONÍA";
    case Label::Negative: return "NEGATIVO";
    case Label::Neutral: return "NEUTRO";
    case Label::Positive: return "POSITIVO";
    case Label::NotIrony: return "NO_IRONÍA";
  }
  return "";
}

/// Row name used in evaluation tables.
constexpr std::string_view display_name(Label label) {
  switch (label) {
    case Label::Irony: return "IRONY";
    case Label::Negative: return "NEGATIVE";
    case Label::Neutral: return "NEUTRAL";
    case Label::Positive: return "POSITIVE";
    case Label::NotIrony: return "NOT IRONY";
  }
  return "";
}

constexpr bool belongs_to(Label label, Mode mode) {
  if (mode == Mode::Binary) return label == Label::Irony || label == Label::NotIrony;
  return label != Label::NotIrony;
}

constexpr int class_count(Mode mode) { return mode == Mode::Multiclass ? 4 : 2; }

/// Fixed category encoding: alphabetical by Spanish name for the four-way
/// task, NO_IRONÍA=0 / IRONÍA=1 for the binary task.
inline int encode(Label label, Mode mode) {
  if (!belongs_to(label, mode)) {
    throw Error(ErrorCode::LabelError, std::string(to_string(label)) + " is not a " +
                                           std::string(to_string(mode)) + " label");
  }
  if (mode == Mode::Binary) return label == Label::Irony ? 1 : 0;
  return static_cast<int>(label);
}

inline Label decode(int index, Mode mode) {
  if (index < 0 || index >= class_count(mode)) {
    throw Error(ErrorCode::LabelError, "class index " + std::to_string(index) + " out of range");
  }
  return mode == Mode::Multiclass ? kMulticlassLabels[static_cast<std::size_t>(index)]
                                  : kBinaryLabels[static_cast<std::size_t>(index)];
}

namespace detail {

// Uppercases ASCII, folds Í/í to I, maps spaces and hyphens to '_'.
inline std::string fold_label(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    auto c = static_cast<unsigned char>(raw[i]);
    if (c == 0xC3 && i + 1 < e) {
      auto n = static_cast<unsigned char>(raw[i + 1]);
      if (n == 0x8D || n == 0xAD) {  // Í, í
        out.push_back('I');
        ++i;
        continue;
      }
    }
    if (c == ' ' || c == '-') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::toupper(c)));
    }
  }
  return out;
}

}  // namespace detail

/// Accepts Spanish and English spellings, any case, with or without accents.
inline std::optional<Label> try_parse_label(std::string_view raw) {
  const std::string s = detail::fold_label(raw);
  if (s == "IRONIA" || s == "IRONY") return Label::Irony;
  if (s == "NEGATIVO" || s == "NEGATIVE") return Label::Negative;
  if (s == "NEUTRO" || s == "NEUTRAL") return Label::Neutral;
  if (s == "POSITIVO" || s == "POSITIVE") return Label::Positive;
  if (s == "NO_IRONIA" || s == "NOT_IRONY" || s == "NO_IRONY" || s == "NOT_IRONIA")
    return Label::NotIrony;
  return std::nullopt;
}

inline Label parse_label(std::string_view raw, Mode mode) {
  auto label = try_parse_label(raw);
  if (!label || !belongs_to(*label, mode)) {
    throw Error(ErrorCode::UnknownLabel,
                "'" + std::string(raw) + "' is not a " + std::string(to_string(mode)) + " label");
  }
  return *label;
}

/// IRONÍA stays, the three sentiment classes collapse to NO_IRONÍA.
constexpr Label to_binary(Label label) {
  return label == Label::Irony ? Label::Irony : Label::NotIrony;
}

}  // namespace ironia
