#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnts/data.hpp"
#include "cnts/numerics.hpp"

namespace cnts {

/// Reconstructor R: window -> reconstructed window, dims [l, hidden..., l],
/// tanh hidden layers, identity output.
struct ReconstructorModel {
    DenseNet net;
    std::size_t window_len = 0;
};

/// Detector D: window -> one raw anomaly score (logit scale) per window
/// position, dims [l, hidden..., l], relu hidden layers, identity output.
struct DetectorModel {
    DenseNet net;
    std::size_t window_len = 0;
};

/// Default hidden chain [4l, 2l] when `hidden` is empty.
ReconstructorModel make_reconstructor(std::size_t window_len,
                                      const std::vector<std::size_t>& hidden,
                                      std::uint64_t seed);
DetectorModel make_detector(std::size_t window_len,
                            const std::vector<std::size_t>& hidden,
                            std::uint64_t seed);

/// Batched inference; output shape equals [n x l] in both cases.
Matrix reconstruct(const ReconstructorModel& model, const WindowBatch& batch);
Matrix detect(const DetectorModel& model, const WindowBatch& batch);

enum class ModelKind { Reconstructor, Detector };

/// On-disk model snapshot. File layout: magic "CNTS1", a length-prefixed text
/// header (kind, window length, dims, activations, config digest), then the
/// parameters as little-endian 64-bit floats in layer order, weights
/// row-major then bias per layer.
struct Checkpoint {
    ModelKind kind = ModelKind::Reconstructor;
    std::size_t window_len = 0;
    std::vector<std::size_t> dims;
    std::vector<Activation> activations;
    std::vector<double> payload;
    std::string config_digest;
};

void save_checkpoint(const ReconstructorModel& model, const std::string& path,
                     const std::string& config_digest = "");
void save_checkpoint(const DetectorModel& model, const std::string& path,
                     const std::string& config_digest = "");

/// Parses and validates a checkpoint file. Version mismatch, truncation and
/// dims/payload disagreement raise distinct load errors.
Checkpoint load_checkpoint(const std::string& path);

/// load_checkpoint plus a kind check.
ReconstructorModel load_reconstructor(const std::string& path);
DetectorModel load_detector(const std::string& path);

/// FNV-1a digest of all parameter bytes; used by tests to pin a model's
/// exact state (frozen-partner contracts).
std::uint64_t param_digest(const DenseNet& net);

} // namespace cnts
