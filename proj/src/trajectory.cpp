#include "swarmnav/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "swarmnav/errors.hpp"

namespace swarmnav::harness {

using nlohmann::json;

namespace {

dynamics::TerminationReason reason_from_string(const std::string& s) {
  using dynamics::TerminationReason;
  for (auto r : {TerminationReason::None, TerminationReason::AllAbsorbed, TerminationReason::MaxSteps,
                 TerminationReason::DriftedAway}) {
    if (dynamics::to_string(r) == s) return r;
  }
  throw ConfigError("unknown termination reason '" + s + "' in trajectory");
}

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, const TrajectoryHeader& h) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
  if (!*out_) throw ConfigError("cannot write trajectory '" + path.string() + "'");
  const json header{{"type", "header"},
                    {"experiment", h.experiment},
                    {"n_swimmers", h.n_swimmers},
                    {"velocity", h.physics.velocity},
                    {"dt", h.physics.dt},
                    {"hydro_coupling", h.physics.hydro_coupling},
                    {"hydro_cap", h.physics.hydro_cap},
                    {"hydro_phase_offset", h.physics.hydro_phase_offset},
                    {"max_steps", h.physics.max_steps},
                    {"abort_distance", h.physics.abort_distance}};
  *out_ << header.dump() << '\n';
}

TrajectoryWriter::~TrajectoryWriter() = default;

void TrajectoryWriter::write(const TrajectoryStep& s) {
  json j{{"type", "step"},
         {"episode", s.episode},
         {"step", s.step},
         {"action", s.action ? json(*s.action) : json(nullptr)},
         {"reward", s.reward},
         {"done", s.done},
         {"reason", std::string(dynamics::to_string(s.reason))},
         {"target", {s.target.center.x, s.target.center.y, s.target.radius}},
         {"x", s.state.xs},
         {"y", s.state.ys},
         {"theta", s.state.thetas},
         {"absorbed", s.state.absorbed}};
  *out_ << j.dump() << '\n';
}

TrajectoryDump read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory '" + path.string() + "'");
  TrajectoryDump dump;
  std::string line;
  bool have_header = false;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto type = j.value("type", std::string{});
    if (type == "header") {
      auto& p = dump.header.physics;
      dump.header.experiment = j.value("experiment", std::string{});
      dump.header.n_swimmers = j.at("n_swimmers").get<int>();
      p.velocity = j.at("velocity").get<double>();
      p.dt = j.at("dt").get<double>();
      p.hydro_coupling = j.at("hydro_coupling").get<double>();
      p.hydro_cap = j.at("hydro_cap").get<double>();
      p.hydro_phase_offset = j.at("hydro_phase_offset").get<double>();
      p.max_steps = j.at("max_steps").get<int>();
      p.abort_distance = j.at("abort_distance").get<double>();
      have_header = true;
      continue;
    }
    if (type != "step") throw ConfigError("trajectory line " + std::to_string(line_no) + ": unknown record type");
    TrajectoryStep s;
    s.episode = j.at("episode").get<long>();
    s.step = j.at("step").get<int>();
    if (!j.at("action").is_null()) s.action = j.at("action").get<double>();
    s.reward = j.at("reward").get<int>();
    s.done = j.at("done").get<bool>();
    s.reason = reason_from_string(j.at("reason").get<std::string>());
    const auto t = j.at("target").get<std::vector<double>>();
    if (t.size() != 3) throw ConfigError("trajectory target must have 3 entries");
    s.target = {{t[0], t[1]}, t[2]};
    s.state.xs = j.at("x").get<std::vector<double>>();
    s.state.ys = j.at("y").get<std::vector<double>>();
    s.state.thetas = j.at("theta").get<std::vector<double>>();
    s.state.absorbed = j.at("absorbed").get<std::vector<std::uint8_t>>();
    s.state.step_count = s.step;
    s.state.episode_index = s.episode;
    s.state.terminated = s.done;
    s.state.reason = s.reason;
    dump.steps.push_back(std::move(s));
  }
  if (!have_header) throw ConfigError("trajectory has no header line");
  return dump;
}

ReplayReport replay(const TrajectoryDump& dump) {
  ReplayReport report;
  dynamics::SwarmState state;
  dynamics::TargetSpec target;
  bool active = false;
  for (const auto& rec : dump.steps) {
    if (!rec.action) {
      state = rec.state;
      state.terminated = false;
      state.reason = dynamics::TerminationReason::None;
      target = rec.target;
      active = true;
      ++report.episodes;
      continue;
    }
    if (!active) throw ContractViolation("trajectory step before its episode's initial state");
    ++report.steps;
    const auto outcome = dynamics::step(state, target, *rec.action, dump.header.physics);
    const bool same = state.xs == rec.state.xs && state.ys == rec.state.ys && state.thetas == rec.state.thetas &&
                      state.absorbed == rec.state.absorbed && outcome.reward == rec.reward &&
                      outcome.terminated == rec.done && outcome.reason == rec.reason;
    if (!same) {
      if (report.mismatches == 0) {
        report.first_mismatch = "episode " + std::to_string(rec.episode) + " step " + std::to_string(rec.step);
      }
      ++report.mismatches;
      // Continue from the recorded state so one divergence is counted once.
      state = rec.state;
    }
    if (outcome.terminated) active = false;
  }
  return report;
}

void render_svg(const TrajectoryDump& dump, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<long, std::vector<const TrajectoryStep*>> episodes;
  for (const auto& s : dump.steps) episodes[s.episode].push_back(&s);

  for (const auto& [ep, steps] : episodes) {
    if (steps.empty()) continue;
    const auto& target = steps.front()->target;
    double lo_x = target.center.x - target.radius, hi_x = target.center.x + target.radius;
    double lo_y = target.center.y - target.radius, hi_y = target.center.y + target.radius;
    for (const auto* s : steps) {
      for (std::size_t i = 0; i < s->state.size(); ++i) {
        lo_x = std::min(lo_x, s->state.xs[i]);
        hi_x = std::max(hi_x, s->state.xs[i]);
        lo_y = std::min(lo_y, s->state.ys[i]);
        hi_y = std::max(hi_y, s->state.ys[i]);
      }
    }
    const double pad = 10.0;
    lo_x -= pad, lo_y -= pad, hi_x += pad, hi_y += pad;
    const double w = hi_x - lo_x, h = hi_y - lo_y;
    const double scale = 600.0 / std::max(w, h);
    auto px = [&](double x) { return (x - lo_x) * scale; };
    auto py = [&](double y) { return (hi_y - y) * scale; };

    std::ostringstream svg;
    svg.setf(std::ios::fixed);
    svg.precision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * scale << "\" height=\"" << h * scale
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<circle cx=\"" << px(target.center.x) << "\" cy=\"" << py(target.center.y) << "\" r=\""
        << target.radius * scale << "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"#3182bd\"/>\n";
    const std::size_t n = steps.front()->state.size();
    for (std::size_t i = 0; i < n; ++i) {
      svg << "<polyline fill=\"none\" stroke=\"#08306b\" stroke-width=\"1\" points=\"";
      for (const auto* s : steps) svg << px(s->state.xs[i]) << ',' << py(s->state.ys[i]) << ' ';
      svg << "\"/>\n";
      const auto& first = steps.front()->state;
      const auto& last = steps.back()->state;
      svg << "<circle cx=\"" << px(first.xs[i]) << "\" cy=\"" << py(first.ys[i]) << "\" r=\"2\" fill=\"#636363\"/>\n";
      svg << "<circle cx=\"" << px(last.xs[i]) << "\" cy=\"" << py(last.ys[i]) << "\" r=\"2.5\" fill=\""
          << (last.absorbed[i] ? "#31a354" : "#de2d26") << "\"/>\n";
    }
    svg << "</svg>\n";
    char name[64];
    std::snprintf(name, sizeof name, "episode_%04ld.svg", ep);
    std::ofstream(dir / name) << svg.str();
  }
}

}  // namespace swarmnav::harness
