#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "stepsim/ctrl.hpp"
#include "stepsim/model.hpp"

namespace stepsim {

/// Failure categories reported by the command-line tool. The integer value
/// is the process exit status.
enum class ErrorCategory { kUsage = 2, kConfig = 3, kTable = 4, kRange = 5, kIo = 6, kSimulation = 7 };
const char* category_name(ErrorCategory c);

class CliError : public std::runtime_error {
 public:
  CliError(ErrorCategory category, const std::string& what) : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

// Model config. Keys carry their units; missing keys keep the value of the
// `base` model, unknown keys are rejected.
nlohmann::ordered_json model_to_json(const RobotModel& model);
RobotModel model_from_json(const nlohmann::json& j, const RobotModel& base = reference_model());
RobotModel load_model(const std::string& path);
void save_model(const RobotModel& model, const std::string& path);

// Threshold table: header "height_m,E_Cw_J,E_Cr_J" then one row per height.
void write_table(std::ostream& os, const ThresholdTable& table);
ThresholdTable read_table(std::istream& is);
ThresholdTable load_table(const std::string& path);
void save_table(const ThresholdTable& table, const std::string& path);

/// Step height from "2h" (multiple of the track height), "0.16m" or a bare
/// number (multiple of h).
double parse_height(const std::string& text, double track_height);

inline constexpr const char* kSeriesHeader =
    "t_s,mode,E_RW_J,E_Rr_J,E_total_J,T_wb_J,T_rb_J,power_W,body_x_m,body_z_m,body_pitch_rad";

/// Time series of one run. With `normalized`, a t_norm column (time over
/// total negotiation time) is appended.
void write_series(std::ostream& os, const NegotiationResult& result, bool normalized = false);

/// e.g. "completed-hybrid, transition at tick 2211 (t = 4.422 s, rear-body gait), total energy 195.478 J, total time 21.6 s"
std::string summary_line(const NegotiationResult& result);

/// Energy curves and thresholds as a small standalone SVG.
void write_svg(std::ostream& os, const NegotiationResult& result, const std::string& title);

}  // namespace stepsim
