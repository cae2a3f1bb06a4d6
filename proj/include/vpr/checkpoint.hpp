#pragma once

#include <string>
#include <vector>

#include "vpr/numerics/optim.hpp"

namespace vpr {

// Everything a training loop needs beyond the parameters themselves to
// resume exactly where it stopped: progress counters, the generator state,
// and the detector's rolling windows.
struct TrainState {
    std::string config_text;  // resolved run description
    int iteration = 0;        // iterations already completed
    std::string rng_state;    // trainer RNG, serialized
    int window_capacity = 0;
    std::vector<std::vector<double>> windows;  // one snapshot per window slot
};

// Write parameters (values and Adam moments), the optimizer step count and
// the training state to a JSON file. Values survive a save/load round trip
// bit-for-bit.
void save_checkpoint(const std::string& path, const ParamStore& store, const TrainState& state);

// Read just the embedded config text, so the caller can rebuild the model
// before asking for the parameters.
std::string checkpoint_config_text(const std::string& path);

// Restore parameters into an existing store. The store must hold the same
// parameter names and shapes the file was written from; mismatches throw
// std::runtime_error. Returns the stored training state.
TrainState load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace vpr
