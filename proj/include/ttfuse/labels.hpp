#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ttfuse {

enum class Valence : std::uint8_t { Negative = 0, Neutral = 1, Positive = 2 };
enum class Arousal : std::uint8_t { Neutral = 0, Positive = 1 };
enum class Context : std::uint8_t {
    InLane = 0,
    Shopping = 1,
    ReturningToLane = 2,
    Roaming = 3,
    Fighting = 4,
    Pushing = 5,
    Defending = 6,
    Dead = 7,
    Miscellaneous = 8,  // raw datasets only
};

inline constexpr std::size_t kValenceClasses = 3;
inline constexpr std::size_t kArousalClasses = 2;
inline constexpr std::size_t kContextClasses = 8;      // after removing Miscellaneous
inline constexpr std::size_t kRawContextClasses = 9;
inline constexpr std::size_t kTotalClasses = kValenceClasses + kArousalClasses + kContextClasses;

enum class Output : std::uint8_t { Valence = 0, Arousal = 1, Context = 2 };
inline constexpr std::array<Output, 3> kAllOutputs{Output::Valence, Output::Arousal, Output::Context};

enum class TaskSet { Joint, AffectOnly, GameOnly };

struct Labels {
    Valence valence = Valence::Neutral;
    Arousal arousal = Arousal::Neutral;
    Context context = Context::InLane;

    std::size_t index(Output o) const {
        switch (o) {
            case Output::Valence: return static_cast<std::size_t>(valence);
            case Output::Arousal: return static_cast<std::size_t>(arousal);
            case Output::Context: return static_cast<std::size_t>(context);
        }
        return 0;
    }
    friend bool operator==(const Labels&, const Labels&) = default;
};

std::size_t class_count(Output o);
std::string_view output_name(Output o);  // "valence", "arousal", "context"
// Short column names in the order of the published results table.
std::string_view class_name(Output o, std::size_t cls);
// Offset of an output's first class in the 13-class flat ordering.
std::size_t class_offset(Output o);

std::vector<Output> outputs_for(TaskSet tasks);
std::string_view task_name(TaskSet tasks);  // "joint", "affect", "game"
TaskSet parse_task(std::string_view name);

}  // namespace ttfuse
