#pragma once

#include <string>

#include "treebridge/drift_net.hpp"

namespace treebridge {

// Checkpoint layout: one-line JSON header (architecture dims, step count, EMA
// decay, parameter count), newline, then the flat little-endian float64
// parameter vector. The stored vector is the EMA shadow used at inference.
void save_checkpoint(const std::string& path, const NetArch& arch,
                     const std::vector<double>& params, long step, double ema_decay);

struct Checkpoint {
  NetArch arch;
  std::vector<double> params;
  long step = 0;
  double ema_decay = 0.0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace treebridge
