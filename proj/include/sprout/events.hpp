#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <json.hpp>

namespace sprout {

enum class EventKind {
    Snapshot,
    StepStarted,
    Observation,
    ThoughtsProposed,
    Votes,
    NodeCreated,
    AnchorResolved,
    ChainChanged,
    Paused,
    Finished,
    Error,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct Event {
    EventKind kind = EventKind::Snapshot;
    nlohmann::json payload;

    bool operator==(const Event&) const = default;
};

using EventSink = std::function<void(const Event&)>;

}  // namespace sprout
