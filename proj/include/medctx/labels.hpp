#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "medctx/error.hpp"

namespace medctx {

// Class order matters: it is the head's output order and the argmax tie-break order.
enum class EventLabel : std::uint8_t { Disposition, NoDisposition, Undetermined };

enum class Action : std::uint8_t { Start, Stop, Increase, Decrease, UniqueDose, OtherChange, Unknown };
enum class Negation : std::uint8_t { Negated, NotNegated };
enum class Temporality : std::uint8_t { Past, Present, Future, Unknown };
enum class Certainty : std::uint8_t { Certain, Hypothetical, Conditional, Unknown };
enum class Actor : std::uint8_t { Physician, Patient, Unknown };

enum class Dimension : std::uint8_t { Action, Negation, Temporality, Certainty, Actor };
inline constexpr std::array<Dimension, 5> kDimensions = {Dimension::Action, Dimension::Negation,
                                                         Dimension::Temporality, Dimension::Certainty,
                                                         Dimension::Actor};

namespace detail {
inline constexpr std::array<std::string_view, 3> kEventNames = {"Disposition", "NoDisposition", "Undetermined"};
inline constexpr std::array<std::string_view, 7> kActionNames = {"Start",      "Stop",        "Increase", "Decrease",
                                                                 "UniqueDose", "OtherChange", "Unknown"};
inline constexpr std::array<std::string_view, 2> kNegationNames = {"Negated", "NotNegated"};
inline constexpr std::array<std::string_view, 4> kTemporalityNames = {"Past", "Present", "Future", "Unknown"};
inline constexpr std::array<std::string_view, 4> kCertaintyNames = {"Certain", "Hypothetical", "Conditional",
                                                                    "Unknown"};
inline constexpr std::array<std::string_view, 3> kActorNames = {"Physician", "Patient", "Unknown"};
inline constexpr std::array<std::string_view, 5> kDimensionNames = {"Action", "Negation", "Temporality",
                                                                    "Certainty", "Actor"};
}  // namespace detail

inline std::span<const std::string_view> event_names() { return detail::kEventNames; }

inline std::span<const std::string_view> dimension_values(Dimension d) {
  switch (d) {
    case Dimension::Action: return detail::kActionNames;
    case Dimension::Negation: return detail::kNegationNames;
    case Dimension::Temporality: return detail::kTemporalityNames;
    case Dimension::Certainty: return detail::kCertaintyNames;
    case Dimension::Actor: return detail::kActorNames;
  }
  return {};
}

inline std::string_view dimension_name(Dimension d) { return detail::kDimensionNames[static_cast<int>(d)]; }

inline std::optional<Dimension> parse_dimension(std::string_view s) {
  for (Dimension d : kDimensions)
    if (dimension_name(d) == s) return d;
  return std::nullopt;
}

inline std::string_view to_string(EventLabel e) { return detail::kEventNames[static_cast<int>(e)]; }

inline std::optional<EventLabel> parse_event(std::string_view s) {
  for (std::size_t i = 0; i < detail::kEventNames.size(); ++i)
    if (detail::kEventNames[i] == s) return static_cast<EventLabel>(i);
  return std::nullopt;
}

inline std::optional<int> parse_dimension_value(Dimension d, std::string_view s) {
  auto names = dimension_values(d);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<int>(i);
  return std::nullopt;
}

// Index of the Unknown category for a dimension, if it has one (Negation does not).
inline std::optional<int> unknown_index(Dimension d) { return parse_dimension_value(d, "Unknown"); }

struct ContextAttributes {
  Action action = Action::Unknown;
  Negation negation = Negation::NotNegated;
  Temporality temporality = Temporality::Unknown;
  Certainty certainty = Certainty::Unknown;
  Actor actor = Actor::Unknown;

  int get(Dimension d) const {
    switch (d) {
      case Dimension::Action: return static_cast<int>(action);
      case Dimension::Negation: return static_cast<int>(negation);
      case Dimension::Temporality: return static_cast<int>(temporality);
      case Dimension::Certainty: return static_cast<int>(certainty);
      case Dimension::Actor: return static_cast<int>(actor);
    }
    return 0;
  }

  void set(Dimension d, int value) {
    if (value < 0 || static_cast<std::size_t>(value) >= dimension_values(d).size())
      throw SchemaError("value " + std::to_string(value) + " outside " + std::string(dimension_name(d)) +
                        " inventory");
    switch (d) {
      case Dimension::Action: action = static_cast<Action>(value); break;
      case Dimension::Negation: negation = static_cast<Negation>(value); break;
      case Dimension::Temporality: temporality = static_cast<Temporality>(value); break;
      case Dimension::Certainty: certainty = static_cast<Certainty>(value); break;
      case Dimension::Actor: actor = static_cast<Actor>(value); break;
    }
  }

  // Default for an unannotated Disposition mention: every dimension Unknown,
  // except Negation which has no Unknown category and defaults to NotNegated.
  static ContextAttributes unknown() { return ContextAttributes{}; }

  friend bool operator==(const ContextAttributes&, const ContextAttributes&) = default;
};

inline std::string_view value_name(Dimension d, int v) { return dimension_values(d)[static_cast<std::size_t>(v)]; }

// The six classification tasks. Event sees every mention, the five dimensions
// see only Disposition mentions.
enum class TaskKind : std::uint8_t { Event, Action, Negation, Temporality, Certainty, Actor };
inline constexpr std::array<TaskKind, 6> kTasks = {TaskKind::Event,       TaskKind::Action,    TaskKind::Negation,
                                                   TaskKind::Temporality, TaskKind::Certainty, TaskKind::Actor};

inline bool is_dimension(TaskKind t) { return t != TaskKind::Event; }
inline Dimension task_dimension(TaskKind t) { return static_cast<Dimension>(static_cast<int>(t) - 1); }
inline TaskKind dimension_task(Dimension d) { return static_cast<TaskKind>(static_cast<int>(d) + 1); }

inline std::span<const std::string_view> task_classes(TaskKind t) {
  return t == TaskKind::Event ? event_names() : dimension_values(task_dimension(t));
}

inline std::string task_name(TaskKind t) {
  if (t == TaskKind::Event) return "event";
  std::string s(dimension_name(task_dimension(t)));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<TaskKind> parse_task(std::string_view s) {
  for (TaskKind t : kTasks)
    if (task_name(t) == s) return t;
  return std::nullopt;
}

}  // namespace medctx
