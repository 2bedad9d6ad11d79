#include "recourse/report.hpp"

#include <sstream>

#include "json.hpp"
#include "recourse/csv.hpp"
#include "recourse/errors.hpp"

namespace recourse::report {

using nlohmann::ordered_json;

namespace {

ordered_json record_json(const eval::MetricsRecord& r) {
  ordered_json j;
  j["subset"] = r.subset;
  j["validity"] = r.validity;
  j["robust_validity"] = r.robust_validity;
  j["proximity"] = r.proximity;
  j["accuracy"] = r.accuracy;
  j["n_instances"] = r.n_instances;
  j["n_shifted_models"] = r.n_shifted_models;
  return j;
}

ordered_json aggregate_json(const eval::MetricsRecord& r) {
  ordered_json j;
  j["validity"] = r.validity;
  j["robust_validity"] = r.robust_validity;
  j["proximity"] = r.proximity;
  j["accuracy"] = r.accuracy;
  j["n_instances"] = r.n_instances;
  j["n_shifted_models"] = r.n_shifted_models;
  j["stds"] = {{"validity", r.validity_std},
               {"robust_validity", r.robust_validity_std},
               {"proximity", r.proximity_std},
               {"accuracy", r.accuracy_std}};
  return j;
}

ordered_json protocol_object(const eval::ProtocolReport& report) {
  ordered_json j;
  j["method"] = std::string(eval::to_string(report.method));
  j["dataset"] = report.dataset;
  j["k"] = report.k;
  j["seed"] = report.seed;
  ordered_json subsets = ordered_json::array();
  for (const auto& r : report.per_subset) subsets.push_back(record_json(r));
  j["per_subset"] = std::move(subsets);
  j["aggregate"] = aggregate_json(report.aggregate);
  return j;
}

}  // namespace

std::string protocol_json(const eval::ProtocolReport& report) { return protocol_object(report).dump(2) + "\n"; }

std::string protocol_array_json(const std::vector<eval::ProtocolReport>& reports) {
  ordered_json j = ordered_json::array();
  for (const auto& r : reports) j.push_back(protocol_object(r));
  return j.dump(2) + "\n";
}

std::vector<eval::ProtocolReport> parse_protocol_array(const std::string& text) {
  std::vector<eval::ProtocolReport> out;
  try {
    auto j = ordered_json::parse(text);
    if (!j.is_array()) throw DataError("report must be a JSON array");
    for (const auto& jr : j) {
      eval::ProtocolReport r;
      r.method = eval::parse_method(jr.at("method").get<std::string>());
      r.dataset = jr.at("dataset").get<std::string>();
      r.k = jr.at("k").get<std::size_t>();
      r.seed = jr.at("seed").get<std::uint64_t>();
      for (const auto& js : jr.at("per_subset")) {
        eval::MetricsRecord m;
        m.subset = js.at("subset").get<std::string>();
        m.validity = js.at("validity").get<double>();
        m.robust_validity = js.at("robust_validity").get<double>();
        m.proximity = js.at("proximity").get<double>();
        m.accuracy = js.at("accuracy").get<double>();
        m.n_instances = js.at("n_instances").get<std::size_t>();
        m.n_shifted_models = js.at("n_shifted_models").get<std::size_t>();
        r.per_subset.push_back(std::move(m));
      }
      r.aggregate = eval::aggregate(r.per_subset);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return out;
}

std::string sweep_csv(const std::vector<eval::SweepRow>& rows) {
  std::ostringstream out;
  out << "T,E,norm,robust_validity,proximity,seed\n";
  for (const auto& r : rows)
    out << r.steps << ',' << format_double(r.epsilon) << ',' << vds::to_string(r.norm) << ','
        << format_double(r.robust_validity) << ',' << format_double(r.proximity) << ',' << r.seed << '\n';
  return out.str();
}

std::string ablation_json(const eval::AblationReport& report) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"E", r.max_epsilon},
                    {"seed", r.seed},
                    {"linear_robust_validity", r.linear_robust_validity},
                    {"static_robust_validity", r.static_robust_validity},
                    {"difference", r.difference}});
  ordered_json summary = ordered_json::array();
  for (const auto& s : report.summary)
    summary.push_back({{"E", s.max_epsilon},
                       {"mean_difference", s.mean_difference},
                       {"std_difference", s.std_difference},
                       {"mean_linear", s.mean_linear},
                       {"mean_static", s.mean_static}});
  j["rows"] = std::move(rows);
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

}  // namespace recourse::report
