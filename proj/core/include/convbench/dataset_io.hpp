#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "convbench/flow.hpp"

namespace convbench {

struct VarRange {
    double min = 0.0;
    double max = 0.0;
};

/// Sidecar description of an NCFD dataset. The per-variable ranges (and the
/// one-step difference ranges) are computed over the first train_count
/// records only, so normalization never sees validation or test data.
struct DatasetManifest {
    int nx = 0;
    int ny = 0;
    double dt = 0.0;
    int count = 0;
    int train_count = 0;
    std::uint64_t seed = 0;
    double length = 0.0;
    std::string data_file;
    std::int64_t header_bytes = 0;
    std::int64_t record_bytes = 0;
    VarRange ux, uy, T;    // absolute values
    VarRange dux, duy, dT; // consecutive differences

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

/// NCFD layout: magic "NCFD", u32 version = 1, u32 nx, u32 ny, f64 dt,
/// u32 n_timesteps, then per record u_x, u_y, T as nx*ny f64 little-endian
/// row-major arrays. Pressure is not stored.
constexpr std::int64_t kNcfdHeaderBytes = 28;

std::int64_t ncfd_record_bytes(int nx, int ny);

class NcfdWriter {
public:
    NcfdWriter(const std::string& path, int nx, int ny, double dt, int n_timesteps);
    void write(const FlowState& state);
    void finish(); // flush + verify the declared record count was written

private:
    std::ofstream os_;
    std::string path_;
    int nx_, ny_, expected_, written_ = 0;
};

struct LoadedDataset {
    int nx = 0;
    int ny = 0;
    double dt = 0.0;
    std::vector<FlowState> states; // p is zero-filled; see fill_hydrostatic
};

LoadedDataset load_ncfd(const std::string& path);

/// Model predictions and file-loaded states carry no pressure; residual
/// evaluation uses the hydrostatic reference column instead.
void fill_hydrostatic(FlowState& state, const SolverParams& params);

} // namespace convbench
