#include "convbench/dataset_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <map>
#include <sstream>

#include "convbench/binio.hpp"

namespace convbench {
namespace {

constexpr char kMagic[4] = {'N', 'C', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void put_field(std::ostream& os, const std::vector<double>& f) {
    for (double v : f) {
        binio::put_f64(os, v);
    }
}

} // namespace

std::int64_t ncfd_record_bytes(int nx, int ny) {
    return 3 * static_cast<std::int64_t>(nx) * ny * 8;
}

NcfdWriter::NcfdWriter(const std::string& path, int nx, int ny, double dt, int n_timesteps)
    : os_(path, std::ios::binary), path_(path), nx_(nx), ny_(ny), expected_(n_timesteps) {
    if (!os_) {
        throw IoError("cannot open " + path + " for writing");
    }
    binio::put_magic(os_, kMagic);
    binio::put_u32(os_, kVersion);
    binio::put_u32(os_, static_cast<std::uint32_t>(nx));
    binio::put_u32(os_, static_cast<std::uint32_t>(ny));
    binio::put_f64(os_, dt);
    binio::put_u32(os_, static_cast<std::uint32_t>(n_timesteps));
}

void NcfdWriter::write(const FlowState& state) {
    if (state.nx != nx_ || state.ny != ny_) {
        throw DimensionError("NCFD record grid mismatch");
    }
    if (written_ >= expected_) {
        throw IoError("NCFD writer: more records than declared");
    }
    put_field(os_, state.u_x);
    put_field(os_, state.u_y);
    put_field(os_, state.T);
    if (!os_) {
        throw IoError("failed writing NCFD record to " + path_);
    }
    ++written_;
}

void NcfdWriter::finish() {
    if (written_ != expected_) {
        throw IoError("NCFD writer: wrote " + std::to_string(written_) + " of " +
                      std::to_string(expected_) + " declared records");
    }
    os_.flush();
    if (!os_) {
        throw IoError("failed flushing " + path_);
    }
}

LoadedDataset load_ncfd(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    binio::expect_magic(is, kMagic, "NCFD");
    const std::uint32_t version = binio::get_u32(is);
    if (version != kVersion) {
        throw IoError("unsupported NCFD version " + std::to_string(version));
    }
    LoadedDataset ds;
    ds.nx = static_cast<int>(binio::get_u32(is));
    ds.ny = static_cast<int>(binio::get_u32(is));
    ds.dt = binio::get_f64(is);
    const std::uint32_t n = binio::get_u32(is);
    ds.states.reserve(n);
    for (std::uint32_t r = 0; r < n; ++r) {
        FlowState s = FlowState::zeros(ds.nx, ds.ny);
        for (auto* field : {&s.u_x, &s.u_y, &s.T}) {
            for (double& v : *field) {
                v = binio::get_f64(is);
            }
        }
        s.require_finite();
        ds.states.push_back(std::move(s));
    }
    return ds;
}

void fill_hydrostatic(FlowState& state, const SolverParams& params) {
    for (int ix = 0; ix < state.nx; ++ix) {
        for (int iy = 0; iy < state.ny; ++iy) {
            state.pres(ix, iy) = params.hydrostatic_p(iy * params.hy());
        }
    }
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    os << "format = NCFD/1\n";
    os << "data_file = " << data_file << "\n";
    os << "nx = " << nx << "\n";
    os << "ny = " << ny << "\n";
    os << "dt = " << fmt_double(dt) << "\n";
    os << "count = " << count << "\n";
    os << "train_count = " << train_count << "\n";
    os << "seed = " << seed << "\n";
    os << "length = " << fmt_double(length) << "\n";
    os << "header_bytes = " << header_bytes << "\n";
    os << "record_bytes = " << record_bytes << "\n";
    auto range = [&](const char* name, const VarRange& r) {
        os << name << "_min = " << fmt_double(r.min) << "\n";
        os << name << "_max = " << fmt_double(r.max) << "\n";
    };
    range("ux", ux);
    range("uy", uy);
    range("T", T);
    range("dux", dux);
    range("duy", duy);
    range("dT", dT);
    if (!os) {
        throw IoError("failed writing manifest " + path);
    }
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto pos = line.find('=');
        if (pos == std::string::npos) {
            throw IoError("malformed manifest line: " + line);
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, pos))] = trim(line.substr(pos + 1));
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw IoError("manifest missing key " + key);
        }
        return it->second;
    };
    DatasetManifest m;
    if (need("format") != "NCFD/1") {
        throw IoError("unsupported manifest format " + need("format"));
    }
    m.data_file = need("data_file");
    m.nx = std::stoi(need("nx"));
    m.ny = std::stoi(need("ny"));
    m.dt = std::stod(need("dt"));
    m.count = std::stoi(need("count"));
    m.train_count = std::stoi(need("train_count"));
    m.seed = std::stoull(need("seed"));
    m.length = std::stod(need("length"));
    m.header_bytes = std::stoll(need("header_bytes"));
    m.record_bytes = std::stoll(need("record_bytes"));
    auto range = [&](const std::string& name) {
        return VarRange{std::stod(need(name + "_min")), std::stod(need(name + "_max"))};
    };
    m.ux = range("ux");
    m.uy = range("uy");
    m.T = range("T");
    m.dux = range("dux");
    m.duy = range("duy");
    m.dT = range("dT");
    return m;
}

} // namespace convbench
