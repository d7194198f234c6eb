#include "qfilter/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qfilter {

namespace {

using nlohmann::json;

/// nlohmann reports byte offsets; turn one into line/column for messages.
std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

double as_real(const json& j, const std::string& name) {
    if (!j.is_number()) {
        throw InputError("model: field \"" + name + "\" must be a number");
    }
    return j.get<double>();
}

Eigen::Index as_dim(const json& j, const std::string& name) {
    if (!j.is_number_integer() || j.get<long long>() < 1) {
        throw InputError("model: field \"" + name + "\" must be a positive integer");
    }
    return static_cast<Eigen::Index>(j.get<long long>());
}

ComplexMatrix as_matrix(const json& j, Eigen::Index rows, Eigen::Index cols,
                        const std::string& name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
        std::ostringstream os;
        os << "model: field \"" << name << "\" must be a row-major array of "
           << rows * cols << " [re, im] pairs";
        throw InputError(os.str());
    }
    ComplexMatrix m(rows, cols);
    Eigen::Index k = 0;
    for (const auto& entry : j) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number()
            || !entry[1].is_number()) {
            throw InputError("model: entries of \"" + name + "\" must be [re, im] pairs");
        }
        m(k / cols, k % cols) = Complex(entry[0].get<double>(), entry[1].get<double>());
        ++k;
    }
    return m;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw InputError("model: unknown field \"" + it.key() + "\" in " + where);
        }
    }
}

LoadedModel from_oscillator(const json& j) {
    reject_unknown(j, {"omega", "gamma", "nu", "sigma0", "hbar"}, "\"oscillator\"");
    for (const char* key : {"omega", "gamma", "nu", "sigma0", "hbar"}) {
        if (!j.contains(key)) {
            throw InputError(std::string("model: oscillator is missing \"") + key + "\"");
        }
    }
    OscillatorModel osc;
    osc.omega = as_real(j.at("omega"), "omega");
    osc.gamma = as_real(j.at("gamma"), "gamma");
    osc.nu = as_real(j.at("nu"), "nu");
    osc.sigma0 = as_real(j.at("sigma0"), "sigma0");
    osc.hbar = as_real(j.at("hbar"), "hbar");
    osc.validate();
    auto [sig, ch] = oscillator_to_general(osc);
    return {std::move(sig), std::move(ch), osc};
}

LoadedModel from_general(const json& j) {
    static const std::set<std::string> fields = {"n", "m", "hbar", "A", "J", "Q",
                                                 "R0", "C0", "F", "N", "T", "D"};
    reject_unknown(j, fields, "model document");
    for (const auto& key : fields) {
        if (!j.contains(key)) {
            throw InputError("model: missing field \"" + key + "\"");
        }
    }
    const Eigen::Index n = as_dim(j.at("n"), "n");
    const Eigen::Index m = as_dim(j.at("m"), "m");
    const double hbar = as_real(j.at("hbar"), "hbar");
    SignalModel sig(as_matrix(j.at("A"), n, n, "A"), as_matrix(j.at("J"), n, m, "J"),
                    as_matrix(j.at("Q"), m, m, "Q"), as_matrix(j.at("R0"), n, n, "R0"),
                    as_matrix(j.at("C0"), n, n, "C0"), hbar);
    ChannelModel ch(as_matrix(j.at("F"), m, n, "F"), as_matrix(j.at("N"), m, m, "N"),
                    as_matrix(j.at("T"), m, m, "T"), as_matrix(j.at("D"), m, m, "D"));
    return {std::move(sig), std::move(ch), std::nullopt};
}

} // namespace

LoadedModel parse_model_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::ostringstream os;
        os << "model: malformed JSON at line " << line << " column " << col;
        throw InputError(os.str());
    }
    if (!j.is_object()) {
        throw InputError("model: document must be a JSON object");
    }
    if (j.contains("oscillator")) {
        reject_unknown(j, {"oscillator"}, "model document");
        if (!j.at("oscillator").is_object()) {
            throw InputError("model: \"oscillator\" must be an object");
        }
        return from_oscillator(j.at("oscillator"));
    }
    return from_general(j);
}

LoadedModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("model: cannot open \"" + path + "\"");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_json(buf.str());
}

std::string matrix_to_json(const ComplexMatrix& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            arr.push_back({m(i, k).real(), m(i, k).imag()});
        }
    }
    return arr.dump();
}

} // namespace qfilter
