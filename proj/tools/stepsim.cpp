// stepsim: prestudy, single runs and sweeps of the step-negotiation simulator.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stepsim/io.hpp"

namespace fs = std::filesystem;
using namespace stepsim;

namespace {

struct Common {
  std::string model_path;
  std::string table_path;
  std::string out;
  double approach = -1.0;
  double speed = -1.0;
  bool svg = false;
};

StepScenario make_scenario(const RobotModel& model, double height, const Common& c) {
  StepScenario s = scenario_for(model, height);
  if (c.approach >= 0.0) s.approach_distance = c.approach;
  if (c.speed > 0.0) s.rolling_speed = c.speed;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(ErrorCategory::kUsage, e.what());
  }
  return s;
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(ErrorCategory::kIo, "cannot create " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(ErrorCategory::kIo, "cannot write " + path.string());
  out << text;
}

void export_run(const NegotiationResult& r, const fs::path& dir, const std::string& stem, bool normalized,
                bool svg, const std::string& title) {
  std::ostringstream csv;
  write_series(csv, r, normalized);
  write_text(dir / (stem + ".csv"), csv.str());
  if (svg) {
    std::ostringstream s;
    write_svg(s, r, title);
    write_text(dir / (stem + ".svg"), s.str());
  }
}

std::string height_label(double height, double h) {
  std::ostringstream ss;
  ss << height << " m (" << height / h << "h)";
  return ss.str();
}

std::string range_text(const ThresholdTable& t) {
  std::ostringstream ss;
  ss << "[" << t.min_height() << ", " << t.max_height() << "] m";
  return ss.str();
}

int cmd_prestudy(const Common& c, const std::vector<std::string>& heights) {
  const RobotModel model = load_model(c.model_path);
  std::vector<double> hs;
  for (const auto& s : heights) hs.push_back(parse_height(s, model.track.height));
  const PrestudyResult pre = prestudy(model, hs);
  for (const auto& w : pre.warnings) std::cerr << "warning: " << w << "\n";
  if (pre.table.empty()) throw CliError(ErrorCategory::kSimulation, "no height could be planned");
  save_table(pre.table, c.out);
  for (const Thresholds& t : pre.table.rows()) {
    std::cout << height_label(t.height, model.track.height) << ": E_Cw " << t.whole << " J, E_Cr " << t.rear
              << " J\n";
  }
  return 0;
}

int cmd_run(const Common& c, const std::string& height_text, bool baseline, bool normalized) {
  const RobotModel model = load_model(c.model_path);
  const double height = parse_height(height_text, model.track.height);
  const StepScenario scenario = make_scenario(model, height, c);
  NegotiationResult r;
  if (baseline) {
    r = run_baseline(scenario, model);
  } else {
    if (c.table_path.empty()) throw CliError(ErrorCategory::kUsage, "--table is required without --baseline");
    const ThresholdTable table = load_table(c.table_path);
    if (!table.covers(height)) {
      throw CliError(ErrorCategory::kRange,
                     "step height " + std::to_string(height) + " m outside table range " + range_text(table));
    }
    r = run_negotiation(scenario, model, table);
  }
  make_dir(c.out);
  export_run(r, c.out, "timeseries", normalized, c.svg, height_label(height, model.track.height));
  const std::string line = summary_line(r);
  write_text(fs::path(c.out) / "summary.txt", line + "\n");
  std::cout << line << "\n";
  return r.outcome == Outcome::kFailed ? static_cast<int>(ErrorCategory::kSimulation) : 0;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& heights) {
  const RobotModel model = load_model(c.model_path);
  const ThresholdTable table = load_table(c.table_path);
  make_dir(c.out);
  std::ostringstream csv;
  csv << "height_m,outcome,transitions,transition_tick,gait,total_energy_J,total_time_s,baseline_outcome,"
         "baseline_energy_J,note\n";
  bool any_failed = false;
  for (const std::string& text : heights) {
    const double height = parse_height(text, model.track.height);
    const StepScenario scenario = make_scenario(model, height, c);
    std::ostringstream name;
    name << "step_" << height;
    const fs::path dir = fs::path(c.out) / name.str();
    make_dir(dir.string());

    const NegotiationResult base = run_baseline(scenario, model);
    std::string note;
    NegotiationResult r;
    if (table.covers(height)) {
      r = run_negotiation(scenario, model, table);
    } else {
      // no thresholds to compare against: report the rolling-only attempt
      note = "no table row, table range " + range_text(table);
      r = base;
    }
    const bool failed = r.outcome == Outcome::kFailed || !note.empty();
    any_failed = any_failed || failed;

    const std::string label = height_label(height, model.track.height);
    export_run(r, dir, "timeseries", false, c.svg, label);
    export_run(base, dir, "baseline", false, c.svg, label + " rolling only");
    std::string line = summary_line(r);
    if (!note.empty()) line = "failed (" + note + "), rolling only: " + line;
    write_text(dir / "summary.txt", line + "\n");
    std::cout << label << ": " << line << "\n";

    std::string reason = note.empty() ? r.failure : note + (r.failure.empty() ? "" : "; " + r.failure);
    for (char& ch : reason) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv << height << ',' << (note.empty() ? outcome_name(r.outcome) : "failed") << ',' << r.transitions() << ','
        << (r.transition_tick ? std::to_string(*r.transition_tick) : "") << ','
        << (r.gait ? gait_name(*r.gait) : "") << ',' << r.total_energy << ',' << r.total_time << ','
        << outcome_name(base.outcome) << ',' << base.total_energy << ',' << reason << '\n';
  }
  write_text(fs::path(c.out) / "sweep.csv", csv.str());
  return any_failed ? static_cast<int>(ErrorCategory::kSimulation) : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Track-legged quadruped step negotiation with energy-based rolling/walking transitions"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> heights;
  std::string height;
  bool baseline = false, normalized = false;

  auto* pre = app.add_subcommand("prestudy", "Energy of both climbing gaits per step height -> threshold table");
  pre->add_option("--model", c.model_path, "model config (JSON)")->required();
  pre->add_option("--heights", heights, "step heights: 2h, 0.16m or 2 (= 2h)")->required();
  pre->add_option("--out", c.out, "threshold table to write (CSV)")->required();

  auto* run = app.add_subcommand("run", "Negotiate one step");
  run->add_option("--model", c.model_path, "model config (JSON)")->required();
  run->add_option("--table", c.table_path, "threshold table (CSV)");
  run->add_option("--height", height, "step height: 2h, 0.16m or 2 (= 2h)")->required();
  run->add_option("--out", c.out, "output directory")->required();
  run->add_flag("--baseline", baseline, "rolling only, thresholds never trigger");
  run->add_flag("--normalized-time", normalized, "append t_norm = t / total time");

  auto* sweep = app.add_subcommand("sweep", "Negotiate several steps, with rolling-only baselines");
  sweep->add_option("--model", c.model_path, "model config (JSON)")->required();
  sweep->add_option("--table", c.table_path, "threshold table (CSV)")->required();
  sweep->add_option("--heights", heights, "step heights")->required();
  sweep->add_option("--out", c.out, "output directory")->required();

  auto* ref = app.add_subcommand("reference", "Write the built-in reference model config");
  ref->add_option("--out", c.out, "model config to write (JSON)")->required();

  for (auto* sub : {run, sweep}) {
    sub->add_option("--approach", c.approach, "rolling distance before the tracks meet the edge, m");
    sub->add_option("--speed", c.speed, "rolling speed, m/s");
    sub->add_flag("--svg", c.svg, "also write energy plots as SVG");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    return static_cast<int>(ErrorCategory::kUsage);
  }

  try {
    if (ref->parsed()) {
      save_model(reference_model(), c.out);
      return 0;
    }
    if (pre->parsed()) return cmd_prestudy(c, heights);
    if (run->parsed()) return cmd_run(c, height, baseline, normalized);
    return cmd_sweep(c, heights);
  } catch (const CliError& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[simulation]: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::kSimulation);
  }
}
