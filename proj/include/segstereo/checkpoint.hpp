#pragma once

#include <string>

#include "segstereo/model.hpp"

namespace segstereo {

// Model interchange file: magic "SSMINI01", then one record per parameter
// in name order: u32 name length, name bytes, u32 rank, rank u32 extents,
// little-endian float32 values. Byte-exact round trip.
void save_checkpoint(const std::string& path, const ModelState& state);

// Fills the parameters of an already-built state; names and extents must
// match exactly.
void load_checkpoint(const std::string& path, ModelState& state);

// Companion key=value file describing the topology, so predict can rebuild
// the model that produced a checkpoint.
void write_model_config(const std::string& path, const ModelConfig& cfg);
ModelConfig read_model_config(const std::string& path);

// Full-precision training sidecar: magic "SSTRAIN1", u64 iter, then f64
// parameter and momentum records. Restoring it (plus replaying the data
// stream to `iter`) resumes training bit-exactly.
struct TrainSidecar {
    int64_t iter = 0;
    std::map<std::string, std::vector<double>> params;
    std::map<std::string, std::vector<double>> momentum;
};

void save_train_sidecar(const std::string& path, const TrainSidecar& s);
TrainSidecar load_train_sidecar(const std::string& path);

}  // namespace segstereo
