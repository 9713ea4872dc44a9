#pragma once

#include <iosfwd>

#include "rsisc/trainer.hpp"

namespace rsisc::cli {

// Two side-by-side panels: training loss, and train/validation accuracy.
void write_history_svg(std::ostream& out, const TrainHistory& history);

}  // namespace rsisc::cli
