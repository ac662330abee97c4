#include "isolex/enums.hpp"

namespace isolex {

std::string_view topic_label(TopicId topic) {
  switch (topic) {
    case TopicId::ChronicSocialIsolation: return "Chronic Social Isolation";
    case TopicId::Divorce: return "Recent or Impending Divorce";
    case TopicId::EvictionMove: return "Eviction or Recent Move";
    case TopicId::BreakUp: return "Break-up";
    case TopicId::ChildCustodyLoss: return "Child Custody Loss";
    case TopicId::PetLoss: return "Loss of Pet";
  }
  return "?";
}

TopicId parse_topic(std::string_view text) {
  if (auto t = parse_enum<TopicId>(text)) return *t;
  throw std::invalid_argument("unknown topic: " + std::string(text));
}

}  // namespace isolex
