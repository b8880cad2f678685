#include "stepsim/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace stepsim {

using nlohmann::json;
using nlohmann::ordered_json;

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kTable: return "table";
    case ErrorCategory::kRange: return "range";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kSimulation: return "simulation";
  }
  return "?";
}

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  throw CliError(ErrorCategory::kConfig, path + ": " + msg);
}

// Reads the keys of one object, rejecting any the caller did not consume.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
  }
  void done() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) config_error(path_ + "." + key, "unknown key");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) config_error(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  void vec3(const std::string& key, Vec3& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) config_error(at(key), "expected 3 numbers");
      for (int i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) config_error(at(key), "expected 3 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json motor_json(const MotorParams& m) {
  return {{"torque_constant_Nm_per_A", m.torque_constant}, {"resistance_ohm", m.resistance}};
}

void read_motor(const json& j, const std::string& path, MotorParams& m) {
  Reader r(j, path);
  r.number("torque_constant_Nm_per_A", m.torque_constant);
  r.number("resistance_ohm", m.resistance);
  r.done();
}

ordered_json leg_json(const LegChain& leg) {
  ordered_json links = ordered_json::array();
  for (const DHLink& l : leg.links) {
    links.push_back({{"b_m", l.b},
                     {"a_m", l.a},
                     {"alpha_rad", l.alpha},
                     {"theta_home_rad", l.theta_home},
                     {"theta_min_rad", l.theta_min},
                     {"theta_max_rad", l.theta_max}});
  }
  ordered_json rot = ordered_json::array();
  for (int i = 0; i < 3; ++i) rot.push_back({leg.mount(i, 0), leg.mount(i, 1), leg.mount(i, 2)});
  return {{"side", leg_name(leg.side)},
          {"mount_rotation", rot},
          {"mount_translation_m", {leg.mount(0, 3), leg.mount(1, 3), leg.mount(2, 3)}},
          {"links", links}};
}

void read_leg(const json& j, const std::string& path, LegChain& leg) {
  Reader r(j, path);
  if (const json* v = r.find("side")) {
    if (!v->is_string()) config_error(r.at("side"), "expected a leg name");
    try {
      leg.side = leg_from_name(v->get<std::string>());
    } catch (const std::exception& e) {
      config_error(r.at("side"), e.what());
    }
  }
  if (const json* v = r.find("mount_rotation")) {
    if (!v->is_array() || v->size() != 3) config_error(r.at("mount_rotation"), "expected 3 rows of 3 numbers");
    for (int i = 0; i < 3; ++i) {
      const json& row = (*v)[i];
      if (!row.is_array() || row.size() != 3) config_error(r.at("mount_rotation"), "expected 3 rows of 3 numbers");
      for (int k = 0; k < 3; ++k) {
        if (!row[k].is_number()) config_error(r.at("mount_rotation"), "expected 3 rows of 3 numbers");
        leg.mount(i, k) = row[k].get<double>();
      }
    }
  }
  Vec3 t = leg.mount.block<3, 1>(0, 3);
  r.vec3("mount_translation_m", t);
  leg.mount.block<3, 1>(0, 3) = t;
  if (const json* v = r.find("links")) {
    if (!v->is_array() || v->size() != kJointsPerLeg) {
      config_error(r.at("links"), "expected " + std::to_string(kJointsPerLeg) + " links");
    }
    for (int i = 0; i < kJointsPerLeg; ++i) {
      Reader lr((*v)[i], r.at("links") + "[" + std::to_string(i) + "]");
      DHLink& l = leg.links[i];
      lr.number("b_m", l.b);
      lr.number("a_m", l.a);
      lr.number("alpha_rad", l.alpha);
      lr.number("theta_home_rad", l.theta_home);
      lr.number("theta_min_rad", l.theta_min);
      lr.number("theta_max_rad", l.theta_max);
      lr.done();
    }
  }
  r.done();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(ErrorCategory::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(ErrorCategory::kIo, "cannot write " + path);
  out << text;
  if (!out) throw CliError(ErrorCategory::kIo, "write failed for " + path);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

ordered_json model_to_json(const RobotModel& m) {
  ordered_json legs = ordered_json::array();
  for (const LegChain& leg : m.legs) legs.push_back(leg_json(leg));
  ordered_json order = ordered_json::array();
  for (LegId id : m.gait.swing_order) order.push_back(leg_name(id));
  return {
      {"dt_s", m.dt},
      {"legs", legs},
      {"leg_motor", motor_json(m.leg_motor)},
      {"track_motor", motor_json(m.track_motor)},
      {"track",
       {{"height_m", m.track.height},
        {"edge_climb_radius_m", m.track.edge_climb_radius},
        {"friction_coefficient", m.track.friction},
        {"rolling_resistance_coefficient", m.track.rolling_resistance}}},
      {"mass",
       {{"total_mass_kg", m.mass.total_mass},
        {"leg_fraction", m.mass.leg_fraction},
        {"gravity_mps2", m.mass.gravity},
        {"body_com_m", {m.mass.body_com.x(), m.mass.body_com.y(), m.mass.body_com.z()}}}},
      {"gait",
       {{"clearance_m", m.gait.clearance},
        {"backward_shift_m", m.gait.backward_shift},
        {"min_margin_m", m.gait.min_margin},
        {"stride_length_m", m.gait.stride_length},
        {"foothold_inset_m", m.gait.foothold_inset},
        {"peak_accel_radps2", m.gait.peak_accel},
        {"min_phase_duration_s", m.gait.min_phase_duration},
        {"track_speed_mps", m.gait.track_speed},
        {"preparation_distance_m", m.gait.preparation_distance},
        {"completion_distance_m", m.gait.completion_distance},
        {"swing_order", order}}},
  };
}

RobotModel model_from_json(const json& j, const RobotModel& base) {
  RobotModel m = base;
  {
    Reader r(j, "model");
    r.number("dt_s", m.dt);
    if (const json* v = r.find("legs")) {
      if (!v->is_array() || v->size() != kLegCount) config_error(r.at("legs"), "expected 4 legs");
      for (int i = 0; i < kLegCount; ++i) read_leg((*v)[i], r.at("legs") + "[" + std::to_string(i) + "]", m.legs[i]);
    }
    if (const json* v = r.find("leg_motor")) read_motor(*v, r.at("leg_motor"), m.leg_motor);
    if (const json* v = r.find("track_motor")) read_motor(*v, r.at("track_motor"), m.track_motor);
    if (const json* v = r.find("track")) {
      Reader t(*v, r.at("track"));
      t.number("height_m", m.track.height);
      t.number("edge_climb_radius_m", m.track.edge_climb_radius);
      t.number("friction_coefficient", m.track.friction);
      t.number("rolling_resistance_coefficient", m.track.rolling_resistance);
      t.done();
    }
    if (const json* v = r.find("mass")) {
      Reader t(*v, r.at("mass"));
      t.number("total_mass_kg", m.mass.total_mass);
      t.number("leg_fraction", m.mass.leg_fraction);
      t.number("gravity_mps2", m.mass.gravity);
      t.vec3("body_com_m", m.mass.body_com);
      t.done();
    }
    if (const json* v = r.find("gait")) {
      Reader t(*v, r.at("gait"));
      t.number("clearance_m", m.gait.clearance);
      t.number("backward_shift_m", m.gait.backward_shift);
      t.number("min_margin_m", m.gait.min_margin);
      t.number("stride_length_m", m.gait.stride_length);
      t.number("foothold_inset_m", m.gait.foothold_inset);
      t.number("peak_accel_radps2", m.gait.peak_accel);
      t.number("min_phase_duration_s", m.gait.min_phase_duration);
      t.number("track_speed_mps", m.gait.track_speed);
      t.number("preparation_distance_m", m.gait.preparation_distance);
      t.number("completion_distance_m", m.gait.completion_distance);
      if (const json* o = t.find("swing_order")) {
        if (!o->is_array() || o->size() != kLegCount) config_error(t.at("swing_order"), "expected 4 leg names");
        for (int i = 0; i < kLegCount; ++i) {
          if (!(*o)[i].is_string()) config_error(t.at("swing_order"), "expected 4 leg names");
          try {
            m.gait.swing_order[i] = leg_from_name((*o)[i].get<std::string>());
          } catch (const std::exception& e) {
            config_error(t.at("swing_order"), e.what());
          }
        }
      }
      t.done();
    }
    r.done();
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(ErrorCategory::kConfig, std::string("model: ") + e.what());
  }
  return m;
}

RobotModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CliError(ErrorCategory::kConfig, path + ": " + e.what());
  }
  return model_from_json(j);
}

void save_model(const RobotModel& model, const std::string& path) {
  write_file(path, model_to_json(model).dump(2) + "\n");
}

void write_table(std::ostream& os, const ThresholdTable& table) {
  os << "height_m,E_Cw_J,E_Cr_J\n";
  for (const Thresholds& t : table.rows()) os << num(t.height) << ',' << num(t.whole) << ',' << num(t.rear) << '\n';
}

ThresholdTable read_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw CliError(ErrorCategory::kTable, "empty threshold table");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "height_m,E_Cw_J,E_Cr_J") {
    throw CliError(ErrorCategory::kTable, "bad header '" + line + "', expected height_m,E_Cw_J,E_Cr_J");
  }
  std::vector<Thresholds> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    if (line.back() == '\r') throw CliError(ErrorCategory::kTable, "line " + std::to_string(n) + ": CR line ending");
    if (std::count(line.begin(), line.end(), ',') != 2) {
      throw CliError(ErrorCategory::kTable, "line " + std::to_string(n) + ": expected 3 fields");
    }
    Thresholds t;
    double* fields[3] = {&t.height, &t.whole, &t.rear};
    std::size_t pos = 0;
    for (int f = 0; f < 3; ++f) {
      const std::size_t end = f < 2 ? line.find(',', pos) : line.size();
      const std::string cell = line.substr(pos, end - pos);
      char* stop = nullptr;
      *fields[f] = std::strtod(cell.c_str(), &stop);
      if (cell.empty() || *stop != '\0') {
        throw CliError(ErrorCategory::kTable, "line " + std::to_string(n) + ": bad number '" + cell + "'");
      }
      pos = end + 1;
    }
    rows.push_back(t);
  }
  try {
    return ThresholdTable(std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw CliError(ErrorCategory::kTable, e.what());
  }
}

ThresholdTable load_table(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return read_table(in);
  } catch (const CliError& e) {
    throw CliError(e.category(), path + ": " + e.what());
  }
}

void save_table(const ThresholdTable& table, const std::string& path) {
  std::ostringstream ss;
  write_table(ss, table);
  write_file(path, ss.str());
}

double parse_height(const std::string& text, double track_height) {
  std::string s = text;
  double scale = track_height;
  if (!s.empty() && (s.back() == 'h' || s.back() == 'H')) {
    s.pop_back();
  } else if (!s.empty() && s.back() == 'm') {
    s.pop_back();
    scale = 1.0;
  }
  char* stop = nullptr;
  const double v = std::strtod(s.c_str(), &stop);
  if (s.empty() || *stop != '\0' || !std::isfinite(v) || v <= 0.0) {
    throw CliError(ErrorCategory::kUsage, "bad step height '" + text + "' (use e.g. 2h, 0.16m or 2)");
  }
  return v * scale;
}

void write_series(std::ostream& os, const NegotiationResult& r, bool normalized) {
  os << kSeriesHeader << (normalized ? ",t_norm" : "") << '\n';
  const double twb = r.thresholds.whole, trb = r.thresholds.rear;
  for (const CurvePoint& p : r.curves) {
    os << fixed(p.time, 6) << ',' << mode_name(p.mode) << ',' << num(p.whole) << ',' << num(p.rear) << ','
       << num(p.total) << ',' << (std::isinf(twb) ? "inf" : num(twb)) << ','
       << (std::isinf(trb) ? "inf" : num(trb)) << ',' << num(p.power) << ',' << num(p.body.x) << ','
       << num(p.body.z) << ',' << num(p.body.pitch);
    if (normalized) os << ',' << num(r.total_time > 0.0 ? p.time / r.total_time : 0.0);
    os << '\n';
  }
}

std::string summary_line(const NegotiationResult& r) {
  std::ostringstream ss;
  ss << outcome_name(r.outcome);
  if (r.transition_tick) {
    const long tick = *r.transition_tick;
    double t = 0.0;
    for (const CurvePoint& p : r.curves) {
      if (p.tick == tick) t = p.time;
    }
    ss << ", transition at tick " << tick << " (t = " << fixed(t, 3) << " s";
    if (r.gait) ss << ", " << gait_name(*r.gait) << " gait";
    ss << ")";
  } else {
    ss << ", no transition";
  }
  ss << ", total energy " << fixed(r.total_energy, 3) << " J, total time " << fixed(r.total_time, 3) << " s";
  if (r.outcome == Outcome::kFailed) ss << ", reason: " << r.failure;
  return ss.str();
}

void write_svg(std::ostream& os, const NegotiationResult& r, const std::string& title) {
  const double w = 640, h = 400, left = 60, right = 20, top = 30, bottom = 40;
  double tmax = r.total_time > 0.0 ? r.total_time : 1.0;
  double emax = 1.0;
  for (const CurvePoint& p : r.curves) emax = std::max(emax, p.whole);
  if (std::isfinite(r.thresholds.whole)) emax = std::max(emax, r.thresholds.whole);
  emax *= 1.05;
  auto sx = [&](double t) { return left + (w - left - right) * t / tmax; };
  auto sy = [&](double e) { return h - bottom - (h - top - bottom) * e / emax; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n"
     << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\" font-size=\"12\">time (s), 0 to " << fixed(tmax, 2)
     << "</text>\n"
     << "<text x=\"4\" y=\"" << top - 8 << "\" font-size=\"12\">energy (J), max " << fixed(emax, 1) << "</text>\n";
  auto curve = [&](auto get, const char* color) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    // every 10th point keeps the file small
    for (std::size_t i = 0; i < r.curves.size(); i += 10) {
      os << fixed(sx(r.curves[i].time), 2) << ',' << fixed(sy(get(r.curves[i])), 2) << ' ';
    }
    if (!r.curves.empty()) os << fixed(sx(r.curves.back().time), 2) << ',' << fixed(sy(get(r.curves.back())), 2);
    os << "\"/>\n";
  };
  curve([](const CurvePoint& p) { return p.whole; }, "blue");
  curve([](const CurvePoint& p) { return p.rear; }, "red");
  auto level = [&](double e, const char* color, const char* label) {
    if (!std::isfinite(e)) return;
    os << "<line x1=\"" << left << "\" y1=\"" << fixed(sy(e), 2) << "\" x2=\"" << w - right << "\" y2=\""
       << fixed(sy(e), 2) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\"/>\n"
       << "<text x=\"" << w - right - 60 << "\" y=\"" << fixed(sy(e) - 4, 2) << "\" font-size=\"11\" fill=\""
       << color << "\">" << label << "</text>\n";
  };
  level(r.thresholds.whole, "blue", "T_wb");
  level(r.thresholds.rear, "red", "T_rb");
  os << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 << "\" font-size=\"11\" fill=\"blue\">E_RW</text>\n"
     << "<text x=\"" << left + 10 << "\" y=\"" << top + 28 << "\" font-size=\"11\" fill=\"red\">E_Rr</text>\n"
     << "</svg>\n";
}

}  // namespace stepsim
