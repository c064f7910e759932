#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace matb {

using Seconds = double;

// The four concurrent supervisory tasks.
enum class Task : std::uint8_t {
    Tracking = 0,
    SystemMonitoring = 1,
    ResourceManagement = 2,
    Communications = 3,
};

inline constexpr std::size_t kTaskCount = 4;
inline constexpr std::array<Task, kTaskCount> kAllTasks = {
    Task::Tracking, Task::SystemMonitoring, Task::ResourceManagement, Task::Communications};

constexpr std::size_t index_of(Task t) noexcept { return static_cast<std::size_t>(t); }

std::string_view task_name(Task t) noexcept;
std::optional<Task> parse_task(std::string_view name) noexcept;

// Small fixed-size set of tasks, ordered by enum value.
class TaskSet {
public:
    constexpr TaskSet() = default;
    static constexpr TaskSet all() noexcept {
        TaskSet s;
        s.bits_ = 0xF;
        return s;
    }
    constexpr void insert(Task t) noexcept { bits_ |= static_cast<std::uint8_t>(1u << index_of(t)); }
    constexpr void erase(Task t) noexcept { bits_ &= static_cast<std::uint8_t>(~(1u << index_of(t))); }
    constexpr bool contains(Task t) const noexcept { return (bits_ >> index_of(t)) & 1u; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr std::size_t size() const noexcept {
        std::size_t n = 0;
        for (auto t : kAllTasks) n += contains(t) ? 1 : 0;
        return n;
    }
    constexpr TaskSet complement() const noexcept {
        TaskSet s;
        s.bits_ = static_cast<std::uint8_t>(~bits_ & 0xF);
        return s;
    }
    constexpr std::uint8_t bits() const noexcept { return bits_; }
    friend constexpr bool operator==(TaskSet, TaskSet) = default;

private:
    std::uint8_t bits_ = 0;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {a.x * s, a.y * s}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
    double norm() const noexcept { return std::hypot(x, y); }
};

// Workload condition / classified operator state.
enum class LoadLabel : std::uint8_t { UL = 0, NL = 1, OL = 2 };

std::string_view label_name(LoadLabel l) noexcept;
LoadLabel parse_label(std::string_view name);  // throws ConfigError

// The four between-subjects adaptation arms.
enum class AdaptationMode : std::uint8_t { None = 0, Autonomy = 1, Interaction = 2, Both = 3 };

std::string_view mode_name(AdaptationMode m) noexcept;
AdaptationMode parse_mode(std::string_view name);  // throws ConfigError

constexpr bool autonomy_enabled(AdaptationMode m) noexcept {
    return m == AdaptationMode::Autonomy || m == AdaptationMode::Both;
}
constexpr bool interaction_enabled(AdaptationMode m) noexcept {
    return m == AdaptationMode::Interaction || m == AdaptationMode::Both;
}

// Workload components, ordered as they appear in WorkloadEstimate.
enum class Component : std::uint8_t { Cognitive = 0, Physical = 1, Visual = 2, Auditory = 3, Speech = 4 };
inline constexpr std::size_t kComponentCount = 5;
inline constexpr std::array<Component, kComponentCount> kAllComponents = {
    Component::Cognitive, Component::Physical, Component::Visual, Component::Auditory, Component::Speech};
// Theoretical maxima; the overall range (62) is their sum.
inline constexpr std::array<double, kComponentCount> kComponentMax = {22.0, 12.0, 20.0, 4.0, 4.0};
inline constexpr double kOverallMax = 62.0;

constexpr std::size_t index_of(Component c) noexcept { return static_cast<std::size_t>(c); }
std::string_view component_name(Component c) noexcept;

// Physiological channels, in the fixed feature order.
enum class Channel : std::uint8_t {
    HeartRate = 0,
    HrVariability = 1,
    RespirationRate = 2,
    PostureMagnitude = 3,
    NoiseLevel = 4,
    SpeechRate = 5,
    SpeechIntensity = 6,
    Pitch = 7,
};
inline constexpr std::size_t kChannelCount = 8;
std::string_view channel_name(Channel c) noexcept;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double clamp01(double v) noexcept { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace matb
