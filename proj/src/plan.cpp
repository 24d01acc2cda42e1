#include "perfhom/plan.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace perfhom {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw std::invalid_argument(path + ": " + message);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const char* key,
                  std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(path + "." + key, "missing");
  }
  if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

std::string get_string(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing");
  if (!obj[key].is_string()) fail(path + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

ProcessSpec parse_process(const json& obj) {
  reject_unknown(obj, "process", {"kind", "intensity", "ns_params", "strauss_params"});
  ProcessSpec spec;
  const std::string kind = get_string(obj, "process", "kind");
  if (kind == "periodic") spec.kind = ProcessKind::Periodic;
  else if (kind == "poisson") spec.kind = ProcessKind::Poisson;
  else if (kind == "neyman_scott") spec.kind = ProcessKind::NeymanScott;
  else if (kind == "strauss") spec.kind = ProcessKind::Strauss;
  else fail("process.kind", "must be periodic|poisson|neyman_scott|strauss");

  spec.intensity = get_number(obj, "process", "intensity", 1.0);
  if (obj.contains("ns_params")) {
    if (spec.kind != ProcessKind::NeymanScott)
      fail("process.ns_params", "only valid for kind neyman_scott");
    const json& ns = obj["ns_params"];
    reject_unknown(ns, "process.ns_params", {"cluster_radius_max", "daughter_intensity"});
    spec.ns_params.cluster_radius_max =
        get_number(ns, "process.ns_params", "cluster_radius_max");
    spec.ns_params.daughter_intensity =
        get_number(ns, "process.ns_params", "daughter_intensity");
  } else if (spec.kind == ProcessKind::NeymanScott) {
    fail("process.ns_params", "missing");
  }
  if (obj.contains("strauss_params")) {
    if (spec.kind != ProcessKind::Strauss)
      fail("process.strauss_params", "only valid for kind strauss");
    const json& st = obj["strauss_params"];
    reject_unknown(st, "process.strauss_params",
                   {"inhibition", "interaction_distance", "mcmc_sweeps"});
    spec.strauss_params.inhibition = get_number(st, "process.strauss_params", "inhibition");
    spec.strauss_params.interaction_distance =
        get_number(st, "process.strauss_params", "interaction_distance");
    spec.strauss_params.mcmc_sweeps = static_cast<int>(
        get_number(st, "process.strauss_params", "mcmc_sweeps", 200.0));
  } else if (spec.kind == ProcessKind::Strauss) {
    fail("process.strauss_params", "missing");
  }
  return spec;
}

RadiiSpec parse_radii(const json& obj) {
  reject_unknown(obj, "radii",
                 {"kind", "constant_value", "pareto", "lognormal", "correlation"});
  RadiiSpec spec;
  const std::string kind = get_string(obj, "radii", "kind");
  if (kind == "constant") spec.kind = RadiiKind::Constant;
  else if (kind == "pareto") spec.kind = RadiiKind::Pareto;
  else if (kind == "lognormal") spec.kind = RadiiKind::LogNormal;
  else if (kind == "correlated_pareto") spec.kind = RadiiKind::CorrelatedPareto;
  else fail("radii.kind", "must be constant|pareto|lognormal|correlated_pareto");

  if (spec.kind == RadiiKind::Constant)
    spec.constant_value = get_number(obj, "radii", "constant_value");
  if (spec.kind == RadiiKind::Pareto || spec.kind == RadiiKind::CorrelatedPareto) {
    if (!obj.contains("pareto")) fail("radii.pareto", "missing");
    const json& p = obj["pareto"];
    reject_unknown(p, "radii.pareto", {"scale", "tail_exponent"});
    spec.pareto.scale = get_number(p, "radii.pareto", "scale");
    spec.pareto.tail_exponent = get_number(p, "radii.pareto", "tail_exponent");
  }
  if (spec.kind == RadiiKind::LogNormal) {
    if (!obj.contains("lognormal")) fail("radii.lognormal", "missing");
    const json& p = obj["lognormal"];
    reject_unknown(p, "radii.lognormal", {"mu", "sigma"});
    spec.lognormal.mu = get_number(p, "radii.lognormal", "mu");
    spec.lognormal.sigma = get_number(p, "radii.lognormal", "sigma");
  }
  if (spec.kind == RadiiKind::CorrelatedPareto) {
    if (!obj.contains("correlation")) fail("radii.correlation", "missing");
    const json& p = obj["correlation"];
    reject_unknown(p, "radii.correlation", {"decay_exponent", "range"});
    spec.correlation.decay_exponent = get_number(p, "radii.correlation", "decay_exponent");
    spec.correlation.range = get_number(p, "radii.correlation", "range");
  }
  return spec;
}

std::vector<double> parse_number_list(const json& arr, const std::string& path) {
  if (!arr.is_array() || arr.empty()) fail(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) fail(path, "expected a nonempty array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

ExperimentPlan parse_plan(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("plan: invalid JSON: ") + e.what());
  }
  reject_unknown(doc, "",
                 {"version", "dim", "process", "radii", "domain", "epsilons", "seeds", "grid",
                  "mode", "source", "partition_exponent", "output", "workers", "stats"});

  ExperimentPlan plan;
  plan.version = static_cast<int>(get_number(doc, "plan", "version"));
  if (plan.version != 1) fail("version", "unsupported plan version");
  plan.dim = static_cast<int>(get_number(doc, "plan", "dim", 3.0));

  if (!doc.contains("process")) fail("process", "missing");
  plan.process = parse_process(doc["process"]);
  if (!doc.contains("radii")) fail("radii", "missing");
  plan.radii = parse_radii(doc["radii"]);

  if (!doc.contains("domain")) fail("domain", "missing");
  const json& dom = doc["domain"];
  reject_unknown(dom, "domain", {"lo", "hi"});
  if (!dom.contains("lo") || !dom.contains("hi")) fail("domain", "needs lo and hi arrays");
  plan.domain = Box(parse_number_list(dom["lo"], "domain.lo"),
                    parse_number_list(dom["hi"], "domain.hi"));

  if (!doc.contains("epsilons")) fail("epsilons", "missing");
  plan.epsilons = parse_number_list(doc["epsilons"], "epsilons");

  if (!doc.contains("seeds")) fail("seeds", "missing");
  const json& seeds = doc["seeds"];
  plan.seeds.clear();
  if (seeds.is_array()) {
    for (const auto& v : seeds) {
      if (!v.is_number_unsigned() && !v.is_number_integer()) fail("seeds", "expected integers");
      plan.seeds.push_back(v.get<std::uint64_t>());
    }
  } else if (seeds.is_object()) {
    reject_unknown(seeds, "seeds", {"count", "base"});
    const auto count = static_cast<std::uint64_t>(get_number(seeds, "seeds", "count"));
    const auto base = static_cast<std::uint64_t>(get_number(seeds, "seeds", "base", 1.0));
    for (std::uint64_t s = 0; s < count; ++s) plan.seeds.push_back(base + s);
  } else {
    fail("seeds", "expected an array or {count, base}");
  }

  if (doc.contains("grid")) {
    const json& grid = doc["grid"];
    reject_unknown(grid, "grid", {"cells_per_eps"});
    plan.cells_per_eps = static_cast<int>(get_number(grid, "grid", "cells_per_eps", 8.0));
  }
  if (doc.contains("mode")) {
    const std::string mode = get_string(doc, "plan", "mode");
    if (mode == "resolved") plan.mode = SolveMode::Resolved;
    else if (mode == "penalty") plan.mode = SolveMode::CapacityPenalty;
    else fail("mode", "must be resolved|penalty");
  }
  if (doc.contains("source")) {
    const std::string source = get_string(doc, "plan", "source");
    if (source == "one") plan.source = SourceKind::One;
    else if (source == "bump") plan.source = SourceKind::Bump;
    else fail("source", "must be one|bump");
  }
  plan.partition_exponent = get_number(doc, "plan", "partition_exponent", 0.0);
  if (doc.contains("output")) plan.output_dir = get_string(doc, "plan", "output");
  plan.workers = static_cast<int>(get_number(doc, "plan", "workers", 0.0));

  if (doc.contains("stats")) {
    const json& st = doc["stats"];
    reject_unknown(st, "stats",
                   {"windows", "deltas", "lags", "seeds", "slln_stderr_multiple",
                    "mixing_sigma_multiple"});
    if (st.contains("windows")) plan.stats.windows = parse_number_list(st["windows"], "stats.windows");
    if (st.contains("deltas")) plan.stats.deltas = parse_number_list(st["deltas"], "stats.deltas");
    if (st.contains("lags")) plan.stats.lags = parse_number_list(st["lags"], "stats.lags");
    plan.stats.seeds = static_cast<int>(get_number(st, "stats", "seeds", 200.0));
    plan.stats.slln_stderr_multiple =
        get_number(st, "stats", "slln_stderr_multiple", 4.0);
    plan.stats.mixing_sigma_multiple =
        get_number(st, "stats", "mixing_sigma_multiple", 3.0);
  }

  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("plan: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_plan(buffer.str());
}

std::string plan_to_json(const ExperimentPlan& plan) {
  json doc;
  doc["version"] = plan.version;
  doc["dim"] = plan.dim;
  json process;
  process["kind"] = to_string(plan.process.kind);
  process["intensity"] = plan.process.intensity;
  if (plan.process.kind == ProcessKind::NeymanScott)
    process["ns_params"] = {{"cluster_radius_max", plan.process.ns_params.cluster_radius_max},
                            {"daughter_intensity", plan.process.ns_params.daughter_intensity}};
  if (plan.process.kind == ProcessKind::Strauss)
    process["strauss_params"] = {
        {"inhibition", plan.process.strauss_params.inhibition},
        {"interaction_distance", plan.process.strauss_params.interaction_distance},
        {"mcmc_sweeps", plan.process.strauss_params.mcmc_sweeps}};
  doc["process"] = process;
  json radii;
  radii["kind"] = to_string(plan.radii.kind);
  if (plan.radii.kind == RadiiKind::Constant)
    radii["constant_value"] = plan.radii.constant_value;
  if (plan.radii.kind == RadiiKind::Pareto || plan.radii.kind == RadiiKind::CorrelatedPareto)
    radii["pareto"] = {{"scale", plan.radii.pareto.scale},
                       {"tail_exponent", plan.radii.pareto.tail_exponent}};
  if (plan.radii.kind == RadiiKind::LogNormal)
    radii["lognormal"] = {{"mu", plan.radii.lognormal.mu},
                          {"sigma", plan.radii.lognormal.sigma}};
  if (plan.radii.kind == RadiiKind::CorrelatedPareto)
    radii["correlation"] = {{"decay_exponent", plan.radii.correlation.decay_exponent},
                            {"range", plan.radii.correlation.range}};
  doc["radii"] = radii;
  doc["domain"] = {{"lo", plan.domain.lo}, {"hi", plan.domain.hi}};
  doc["epsilons"] = plan.epsilons;
  doc["seeds"] = plan.seeds;
  doc["grid"] = {{"cells_per_eps", plan.cells_per_eps}};
  doc["mode"] = plan.mode == SolveMode::Resolved ? "resolved" : "penalty";
  doc["source"] = plan.source == SourceKind::One ? "one" : "bump";
  doc["partition_exponent"] = plan.partition_exponent;
  if (!plan.output_dir.empty()) doc["output"] = plan.output_dir;
  if (plan.workers != 0) doc["workers"] = plan.workers;
  doc["stats"] = {{"windows", plan.stats.windows},
                  {"deltas", plan.stats.deltas},
                  {"lags", plan.stats.lags},
                  {"seeds", plan.stats.seeds},
                  {"slln_stderr_multiple", plan.stats.slln_stderr_multiple},
                  {"mixing_sigma_multiple", plan.stats.mixing_sigma_multiple}};
  return doc.dump();
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace perfhom
