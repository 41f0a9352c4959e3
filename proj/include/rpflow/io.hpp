#pragma once

#include "rpflow/cfm_train.hpp"
#include "rpflow/posterior_pipeline.hpp"
#include "rpflow/velocity_net.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace rpflow::io {

// ---------------------------------------------------------------------------
// Images: binary PGM (P5) and PPM (P6), 8- or 16-bit, normalized to [0,1].
// ---------------------------------------------------------------------------

struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;   // 1 (PGM) or 3 (PPM)
    std::size_t maxval = 255;   // 255 or 65535
    Matrix values;              // (height*width) x channels, row-major grid, in [0,1]
};

Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

/// Grid coordinates in [0,1]^2 matching the image's row-major pixel order;
/// pixel (r,c) maps to (x0, x1) = (c/(w-1), r/(h-1)).
Matrix image_grid(std::size_t height, std::size_t width);

// ---------------------------------------------------------------------------
// Field CSV: header "x0,..,x{d-1},v0,..,v{m-1}", one observation per row.
// ---------------------------------------------------------------------------

cfm::FieldObservations load_field_csv(const std::string& path);
void save_field_csv(const cfm::FieldObservations& obs, const std::string& path);

// ---------------------------------------------------------------------------
// Checkpoints: basis/encoder + net + training echo + optional optimizer and
// EMA state. Little-endian binary with magic and version; round trips
// bitwise.
// ---------------------------------------------------------------------------

struct Checkpoint {
    rff::PositionEncoder encoder;
    net::TimeEmbedding time_embedding;
    net::Mlp net;
    cfm::TrainConfig train_config;
    std::optional<net::AdamState> adam;
    std::optional<std::vector<net::Layer>> ema_shadow;
    double ema_decay = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Ensemble container.
// ---------------------------------------------------------------------------

void save_ensemble(const pipeline::Ensemble& e, const std::string& path);
pipeline::Ensemble load_ensemble(const std::string& path);

/// CSV with one row per position: coordinates, then per-channel mean and std.
void save_summary_csv(const pipeline::Ensemble& e, const std::string& path);

// ---------------------------------------------------------------------------
// Flat key = value configuration with '#' comments.
// ---------------------------------------------------------------------------

class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

    /// Throws InvalidParam when a stored key was never listed as known.
    void reject_unknown(const std::set<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace rpflow::io
