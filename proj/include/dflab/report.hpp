#pragma once

#include <string>

#include <json.hpp>

namespace dflab {

// Machine-readable outcome of one property check. Serialized reports are
// deterministic: fixed key order, no timing data.
struct VerificationReport {
    std::string check;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    bool pass = false;
    nlohmann::ordered_json counterexample; // null when the check passed
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json out;
        out["check"] = check;
        out["params"] = params;
        out["pass"] = pass;
        out["counterexample"] = counterexample;
        out["metrics"] = metrics;
        return out;
    }
};

} // namespace dflab
