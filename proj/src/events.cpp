#include "sprout/events.hpp"

#include <utility>

namespace sprout {

namespace {

constexpr std::pair<EventKind, std::string_view> kNames[] = {
    {EventKind::Snapshot, "Snapshot"},
    {EventKind::StepStarted, "StepStarted"},
    {EventKind::Observation, "Observation"},
    {EventKind::ThoughtsProposed, "ThoughtsProposed"},
    {EventKind::Votes, "Votes"},
    {EventKind::NodeCreated, "NodeCreated"},
    {EventKind::AnchorResolved, "AnchorResolved"},
    {EventKind::ChainChanged, "ChainChanged"},
    {EventKind::Paused, "Paused"},
    {EventKind::Finished, "Finished"},
    {EventKind::Error, "Error"},
};

}  // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kNames) {
        if (k == kind) return name;
    }
    return "Unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (const auto& [k, name] : kNames) {
        if (name == text) return k;
    }
    return std::nullopt;
}

}  // namespace sprout
