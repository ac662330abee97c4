#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace isolex {

// Every enum below serializes as the SCREAMING_SNAKE_CASE of its member name.
// The member order is part of the file formats and must not change.

enum class TopicId { ChronicSocialIsolation, Divorce, EvictionMove, BreakUp, ChildCustodyLoss, PetLoss };

enum class Sex { Female, Male, Unknown };

enum class RaceEthnicity {
  AmericanIndianAlaskaNative,
  AsianPacificIslander,
  BlackAfricanAmerican,
  Hispanic,
  OtherUnspecified,
  TwoOrMore,
  White,
  Unknown
};

enum class SexualOrientation { Bisexual, Gay, Heterosexual, Lesbian, UnspecifiedMinority, NotReported };

enum class Transgender { Yes, NoOrUnknown };

enum class MaritalStatus { Divorced, Married, MarriedSeparated, NeverMarried, Single, Widowed, Unknown };

enum class RelationshipStatus { InRelationship, NotInRelationship, Unknown };

enum class Homeless { Yes, No, Unknown };

enum class PhysicalHealth { Yes, NoOrUnknown };

template <typename E>
struct EnumTraits;

#define ISOLEX_ENUM_TRAITS(Type, ...)                                 \
  template <>                                                         \
  struct EnumTraits<Type> {                                           \
    static constexpr std::array<std::string_view,                     \
        std::initializer_list<const char*>{__VA_ARGS__}.size()> names{ \
        __VA_ARGS__};                                                 \
  }

ISOLEX_ENUM_TRAITS(TopicId, "CHRONIC_SOCIAL_ISOLATION", "DIVORCE", "EVICTION_MOVE", "BREAK_UP",
                   "CHILD_CUSTODY_LOSS", "PET_LOSS");
ISOLEX_ENUM_TRAITS(Sex, "FEMALE", "MALE", "UNKNOWN");
ISOLEX_ENUM_TRAITS(RaceEthnicity, "AMERICAN_INDIAN_ALASKA_NATIVE", "ASIAN_PACIFIC_ISLANDER",
                   "BLACK_AFRICAN_AMERICAN", "HISPANIC", "OTHER_UNSPECIFIED", "TWO_OR_MORE", "WHITE",
                   "UNKNOWN");
ISOLEX_ENUM_TRAITS(SexualOrientation, "BISEXUAL", "GAY", "HETEROSEXUAL", "LESBIAN",
                   "UNSPECIFIED_MINORITY", "NOT_REPORTED");
ISOLEX_ENUM_TRAITS(Transgender, "YES", "NO_OR_UNKNOWN");
ISOLEX_ENUM_TRAITS(MaritalStatus, "DIVORCED", "MARRIED", "MARRIED_SEPARATED", "NEVER_MARRIED",
                   "SINGLE", "WIDOWED", "UNKNOWN");
ISOLEX_ENUM_TRAITS(RelationshipStatus, "IN_RELATIONSHIP", "NOT_IN_RELATIONSHIP", "UNKNOWN");
ISOLEX_ENUM_TRAITS(Homeless, "YES", "NO", "UNKNOWN");
ISOLEX_ENUM_TRAITS(PhysicalHealth, "YES", "NO_OR_UNKNOWN");

#undef ISOLEX_ENUM_TRAITS

template <typename E>
constexpr std::size_t enum_count() {
  return EnumTraits<E>::names.size();
}

template <typename E>
constexpr std::size_t enum_index(E value) {
  return static_cast<std::size_t>(value);
}

template <typename E>
constexpr E enum_from_index(std::size_t i) {
  return static_cast<E>(i);
}

template <typename E>
constexpr std::string_view to_string(E value) {
  return EnumTraits<E>::names[enum_index(value)];
}

template <typename E>
std::optional<E> parse_enum(std::string_view text) {
  const auto& names = EnumTraits<E>::names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == text) return enum_from_index<E>(i);
  }
  return std::nullopt;
}

template <typename E>
constexpr std::array<E, enum_count<E>()> all_values() {
  std::array<E, enum_count<E>()> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = enum_from_index<E>(i);
  return out;
}

inline constexpr std::array<TopicId, 6> kAllTopics = all_values<TopicId>();

/// Human-readable topic name used in report tables.
std::string_view topic_label(TopicId topic);

/// Parses a topic from its enum name, throwing std::invalid_argument otherwise.
TopicId parse_topic(std::string_view text);

}  // namespace isolex
