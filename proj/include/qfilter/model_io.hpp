#pragma once

#include <optional>
#include <string>

#include "qfilter/model.hpp"

namespace qfilter {

/// A model loaded from disk; oscillator is set when the file used the
/// oscillator shorthand.
struct LoadedModel {
    SignalModel signal;
    ChannelModel channel;
    std::optional<OscillatorModel> oscillator;
};

/// Parses a model document. Two layouts are accepted:
///   {"n", "m", "hbar", "A", "J", "Q", "R0", "C0", "F", "N", "T", "D"}
///   {"oscillator": {"omega", "gamma", "nu", "sigma0", "hbar"}}
/// Complex matrices are flat row-major arrays of [re, im] pairs. Unknown
/// fields are rejected. Parse errors carry line/column information.
LoadedModel parse_model_json(const std::string& text);

/// Reads and parses a model file; throws InputError when the file is
/// missing or malformed.
LoadedModel load_model_file(const std::string& path);

/// Serializes a matrix as a flat row-major array of [re, im] pairs
/// (the same encoding model files use).
std::string matrix_to_json(const ComplexMatrix& m);

} // namespace qfilter
