#include "ttfuse/labels.hpp"

#include <stdexcept>
#include <string>

namespace ttfuse {

std::size_t class_count(Output o) {
    switch (o) {
        case Output::Valence: return kValenceClasses;
        case Output::Arousal: return kArousalClasses;
        case Output::Context: return kContextClasses;
    }
    return 0;
}

std::string_view output_name(Output o) {
    switch (o) {
        case Output::Valence: return "valence";
        case Output::Arousal: return "arousal";
        case Output::Context: return "context";
    }
    return "?";
}

std::string_view class_name(Output o, std::size_t cls) {
    static constexpr std::string_view valence[] = {"Neg V", "Neut V", "Pos V"};
    static constexpr std::string_view arousal[] = {"Neut A", "Pos A"};
    static constexpr std::string_view context[] = {"In Lane", "Shopping", "Returning", "Roaming",
                                                   "Fighting", "Pushing", "Defending", "Dead", "Misc"};
    switch (o) {
        case Output::Valence: return valence[cls];
        case Output::Arousal: return arousal[cls];
        case Output::Context: return context[cls];
    }
    return "?";
}

std::size_t class_offset(Output o) {
    switch (o) {
        case Output::Valence: return 0;
        case Output::Arousal: return kValenceClasses;
        case Output::Context: return kValenceClasses + kArousalClasses;
    }
    return 0;
}

std::vector<Output> outputs_for(TaskSet tasks) {
    switch (tasks) {
        case TaskSet::Joint: return {Output::Valence, Output::Arousal, Output::Context};
        case TaskSet::AffectOnly: return {Output::Valence, Output::Arousal};
        case TaskSet::GameOnly: return {Output::Context};
    }
    return {};
}

std::string_view task_name(TaskSet tasks) {
    switch (tasks) {
        case TaskSet::Joint: return "joint";
        case TaskSet::AffectOnly: return "affect";
        case TaskSet::GameOnly: return "game";
    }
    return "?";
}

TaskSet parse_task(std::string_view name) {
    if (name == "joint") return TaskSet::Joint;
    if (name == "affect") return TaskSet::AffectOnly;
    if (name == "game") return TaskSet::GameOnly;
    throw std::invalid_argument("unknown task set '" + std::string(name) + "' (expected joint|affect|game)");
}

}  // namespace ttfuse
