#pragma once

#include <string>
#include <vector>

#include "recourse/evaluation.hpp"

namespace recourse::report {

// {method, dataset, k, seed, per_subset: [...], aggregate: {...}}
std::string protocol_json(const eval::ProtocolReport& report);
// Array of protocol objects, one per method.
std::string protocol_array_json(const std::vector<eval::ProtocolReport>& reports);

// Reads per-subset records back; the aggregate is recomputed from them.
std::vector<eval::ProtocolReport> parse_protocol_array(const std::string& text);

// Header T,E,norm,robust_validity,proximity,seed.
std::string sweep_csv(const std::vector<eval::SweepRow>& rows);

std::string ablation_json(const eval::AblationReport& report);

}  // namespace recourse::report
