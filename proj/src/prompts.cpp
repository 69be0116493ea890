#include "videomind/prompts.hpp"

#include <charconv>
#include <cmath>

#include "videomind/error.hpp"

namespace videomind {

namespace {

constexpr const char* kPlanner =
    "You are acting as the planner now. Given a question about the video, your task is to analyze the question "
    "and identify the best way to answer this question. You have access to the following tools:\n\n"
    "Grounder: Accepts a text query and localizes the relevant video segment according to the query.\n"
    "Verifier: A tool supporting grounder by verifying the reliability of its outputs.\n"
    "Answerer: Answer a given question directly based on the whole video or a cropped video segment.\n\n"
    "Your response must be a list in JSON format. A valid plan for reasoning could be \"grounder, verifier, "
    "answer\", \"grounder, verifier\", or \"answerer\", depending on the given question. Please see an example "
    "of the format below.\n\n"
    "[{\"type\": \"grounder\", \"value\": \"text query\"}, {\"type\": \"verifier\"}, {\"type\": \"answerer\"}]\n\n"
    "Note that only the grounder can accept an argument called \"value\", which is the text query used for "
    "grounding. Now I give you the question: \"{question}\". Please think carefully and respond with your plan "
    "in JSON directly.";

constexpr const char* kGrounder =
    "You are acting as the grounder now. Given a video and a text query, your goal is to temporally localize the "
    "video moment described by the query. If the query is directly describing a moment, simply localize it "
    "according to its content. Otherwise, if the moment is described as \"before/after a pivotal event\", you "
    "need to determine the actual event it refers to. The localized moment should only cover the target event. "
    "Now I give you the query: \"{query}\". Please think carefully and provide your response.";

constexpr const char* kVerifier =
    "You are acting as the verifier now. You will be presented a text query describing a moment that potentialy "
    "happens in the given video. Your task is to identify whether the video segment between <SEG-START> and "
    "<SEG-END> perfectly covers the moment. If the described moment can be seen in the video, please focus on "
    "verifying whether the moment starts at <SEG-START> and ends at <SEG-END>. Respond with \"Yes\" if you think "
    "the moment boundaries are correct, otherwise \"No\". If the described moment cannot be seen in the video, "
    "respond with \"No\" directly. Now I give you the query: \"{query}\". Please think carefully and respond with "
    "\"Yes\" or \"No\" directly.";

constexpr const char* kRephrase =
    "You are an expert in rewriting questions into queries. I will give you a question that requires to be "
    "answered based on a specific moment in a video. Your task is to analyze the question and rewrite it into a "
    "declarative sentence, which could be used as a text query to search for the relevant video moment. The query "
    "should be concise, describing the key event or key scene that the question asks for.\n\n"
    "Here are some examples:\n\n"
    "Question: How does the male cyclist react when he sees the steep path?\n"
    "Query: The male cyclist sees the steep path.\n\n"
    "Question: What did the girl do at the end of the video?\n"
    "Query: The end of the video.\n\n"
    "Question: What did the lady do as she was cycling off?\n"
    "Query: The lady is cycling off.\n\n"
    "Question: What is the person with red shirt doing on the yacht?\n"
    "Query: The person with red shirt stays on the yacht.\n\n"
    "Now I give you the question: \"{question}\". Please think carefully and respond with the query directly.";

const std::string& require_slot(const std::optional<std::string>& slot, const char* name, Role role) {
    if (!slot || slot->empty())
        throw TemplateError("the " + std::string(role_name(role)) + " prompt requires slot {" + name + "}");
    return *slot;
}

std::string fill_slot(std::string tmpl, const std::string& key, const std::string& value) {
    const std::string needle = "{" + key + "}";
    for (auto pos = tmpl.find(needle); pos != std::string::npos; pos = tmpl.find(needle, pos + value.size()))
        tmpl.replace(pos, needle.size(), value);
    return tmpl;
}

}  // namespace

std::string truncate_lines(const std::string& text, std::size_t max_lines) {
    std::size_t pos = 0;
    for (std::size_t line = 0; line < max_lines; ++line) {
        pos = text.find('\n', pos);
        if (pos == std::string::npos)
            return text;
        ++pos;
    }
    std::string out = text.substr(0, pos);
    if (!out.empty() && out.back() == '\n')
        out.pop_back();
    return out;
}

std::string format_seconds(double seconds) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), seconds);
    return std::string(buf, res.ptr);
}

std::string render_prompt(Role role, const PromptSlots& slots) {
    switch (role) {
        case Role::planner:
            return fill_slot(kPlanner, "question", require_slot(slots.question, "question", role));
        case Role::grounder:
            return fill_slot(kGrounder, "query", require_slot(slots.query, "query", role));
        case Role::verifier:
            return fill_slot(kVerifier, "query", require_slot(slots.query, "query", role));
        case Role::answerer: {
            const std::string& question = require_slot(slots.question, "question", role);
            if (!slots.duration || !std::isfinite(*slots.duration))
                throw TemplateError("the answerer prompt requires slot {duration}");
            std::string out = "You are given a video with " + format_seconds(*slots.duration) + " seconds long.\n";
            if (slots.subtitles && !slots.subtitles->empty())
                out += "Subtitles: " + truncate_lines(*slots.subtitles) + "\n";
            out += question;
            if (slots.options && !slots.options->empty()) {
                if (slots.options->size() > 26)
                    throw TemplateError("at most 26 options can be lettered");
                out += "\nOptions:";
                for (std::size_t i = 0; i < slots.options->size(); ++i) {
                    if ((*slots.options)[i].empty())
                        throw TemplateError("option " + std::to_string(i + 1) + " is empty");
                    out += "\n(" + std::string(1, static_cast<char>('A' + i)) + ") " + (*slots.options)[i];
                }
                out += "\nPlease only give the best option.";
            }
            return out;
        }
    }
    throw TemplateError("no template for role");
}

std::string render_rephrase_prompt(const std::string& question) {
    if (question.empty())
        throw TemplateError("the rephrasing prompt requires slot {question}");
    return fill_slot(kRephrase, "question", question);
}

}  // namespace videomind
