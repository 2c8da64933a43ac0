#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "adaclust/datagen.hpp"
#include "adaclust/error.hpp"
#include "adaclust/hash.hpp"
#include "adaclust/model.hpp"

namespace adaclust {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline json to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  require(data.size() == rows * cols, ErrorCode::shape_inconsistency, "matrix data length does not match its shape");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

inline std::string schedule_to_string(const ClusteringSchedule& s) {
  switch (s.kind) {
    case ClusteringSchedule::Kind::logarithmic: return "log";
    case ClusteringSchedule::Kind::every_epoch: return "every";
    case ClusteringSchedule::Kind::constant_set: {
      std::string out = "epochs=";
      for (std::size_t i = 0; i < s.explicit_epochs.size(); ++i)
        out += (i ? "," : "") + std::to_string(s.explicit_epochs[i]);
      return out;
    }
  }
  return "?";
}

}  // namespace detail

/// Parses log | every | const | epochs=a,b,c. `const` needs the epoch count to
/// place its start/middle/end rounds.
inline ClusteringSchedule parse_schedule(const std::string& text, std::size_t total_epochs) {
  if (text == "log") return ClusteringSchedule::logarithmic();
  if (text == "every") return ClusteringSchedule::every_epoch();
  if (text == "const") return ClusteringSchedule::start_middle_end(total_epochs);
  if (text.rfind("epochs=", 0) == 0) {
    std::vector<std::size_t> epochs;
    std::stringstream in(text.substr(7));
    std::string item;
    while (std::getline(in, item, ',')) {
      std::size_t pos = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(item, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      detail::require(pos == item.size() && v >= 1, ErrorCode::invalid_argument, "bad schedule epoch '" + item + "'");
      epochs.push_back(v);
    }
    detail::require(!epochs.empty(), ErrorCode::invalid_argument, "empty epoch list in schedule");
    return ClusteringSchedule::at(std::move(epochs));
  }
  throw Error(ErrorCode::invalid_argument, "unknown schedule '" + text + "'");
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"clusters_per_class", c.clusters_per_class},
          {"d_start", c.d_start},
          {"d_end", c.d_end},
          {"schedule", detail::schedule_to_string(c.schedule)},
          {"variant", to_string(c.variant)},
          {"epochs", c.sgd.epochs},
          {"learning_rate", c.sgd.learning_rate},
          {"weight_decay", c.sgd.weight_decay},
          {"batch_size", c.sgd.batch_size},
          {"seed", c.sgd.seed},
          {"finetune_epochs", c.finetune_epochs},
          {"center_spectrum", c.center_spectrum},
          {"kmeans_max_iters", c.kmeans.max_iters},
          {"kmeans_rel_tol", c.kmeans.rel_tol},
          {"kmeans_n_init", c.kmeans.n_init}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.clusters_per_class = j.at("clusters_per_class").get<std::size_t>();
  c.d_start = j.at("d_start").get<std::size_t>();
  c.d_end = j.at("d_end").get<std::size_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.sgd.epochs = j.at("epochs").get<std::size_t>();
  c.sgd.learning_rate = j.at("learning_rate").get<double>();
  c.sgd.weight_decay = j.at("weight_decay").get<double>();
  c.sgd.batch_size = j.at("batch_size").get<std::size_t>();
  c.sgd.seed = j.at("seed").get<std::uint64_t>();
  c.finetune_epochs = j.at("finetune_epochs").get<std::size_t>();
  c.center_spectrum = j.at("center_spectrum").get<bool>();
  c.kmeans.max_iters = j.at("kmeans_max_iters").get<std::size_t>();
  c.kmeans.rel_tol = j.at("kmeans_rel_tol").get<double>();
  c.kmeans.n_init = j.at("kmeans_n_init").get<std::size_t>();
  c.schedule = parse_schedule(j.at("schedule").get<std::string>(), c.sgd.epochs);
  return c;
}

inline std::string config_fingerprint(const TrainConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

inline nlohmann::json mother_to_json(const MotherConfig& c) {
  return {{"num_classes", c.num_classes},       {"d_raw", c.d_raw},
          {"theta_lo", c.theta_lo},             {"theta_hi", c.theta_hi},
          {"shift_scale", c.shift_scale},       {"noise_scale", c.noise_scale},
          {"prototype_scale", c.prototype_scale}, {"rotated_planes", c.rotated_planes},
          {"shift_rank", c.shift_rank},         {"seed", c.seed}};
}

inline MotherConfig mother_from_json(const nlohmann::json& j) {
  MotherConfig c;
  try {
    c.num_classes = j.at("num_classes").get<int>();
    c.d_raw = j.at("d_raw").get<int>();
    c.theta_lo = j.at("theta_lo").get<double>();
    c.theta_hi = j.at("theta_hi").get<double>();
    c.shift_scale = j.at("shift_scale").get<double>();
    c.noise_scale = j.at("noise_scale").get<double>();
    c.prototype_scale = j.at("prototype_scale").get<double>();
    c.rotated_planes = j.at("rotated_planes").get<int>();
    c.shift_rank = j.at("shift_rank").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad mother config: ") + e.what());
  }
  validate(c);
  return c;
}

/// Versioned JSON. Doubles are written in nlohmann's shortest round-trip
/// form, so load(save(m)) reproduces every weight bit for bit.
inline std::string model_to_json(const AdaptiveClassifier& m) {
  using detail::to_json;
  nlohmann::json j;
  j["version"] = kModelFormatVersion;
  j["config"] = config_to_json(m.config);
  j["fingerprint"] = m.fingerprint;
  j["omega"] = {{"W1", to_json(m.omega.W1)}, {"b1", m.omega.b1}, {"W2", to_json(m.omega.W2)}, {"b2", m.omega.b2}};
  j["head"] = {{"W", to_json(m.head.W)}, {"b", m.head.b}};
  if (m.pseudo) {
    const auto& b = m.pseudo->basis;
    j["basis"] = {{"V", to_json(b.eigenvectors)}, {"S", b.eigenvalues}, {"d_start", b.d_start}, {"d_end", b.d_end}};
    j["centroids"] = {{"psi", to_json(m.pseudo->centroids.psi)},
                      {"K", m.pseudo->centroids.K()},
                      {"final_cost", m.pseudo->centroids.final_cost},
                      {"iteration_count", m.pseudo->centroids.iteration_count},
                      {"created_at_epoch", m.pseudo->created_at_epoch}};
  } else {
    j["basis"] = nullptr;
    j["centroids"] = nullptr;
  }
  return j.dump() + "\n";
}

inline AdaptiveClassifier model_from_json(const std::string& text) {
  using detail::matrix_from_json;
  using detail::require;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::corrupt_model, "corrupt model file");
  }
  try {
    require(j.is_object() && j.contains("version"), ErrorCode::corrupt_model, "corrupt model file");
    const int version = j.at("version").get<int>();
    require(version == kModelFormatVersion, ErrorCode::unsupported_version,
            "unsupported version " + std::to_string(version));

    AdaptiveClassifier m;
    m.config = config_from_json(j.at("config"));
    m.fingerprint = j.at("fingerprint").get<std::string>();
    require(m.fingerprint == config_fingerprint(m.config), ErrorCode::corrupt_model,
            "corrupt model file: fingerprint does not match config");
    const auto& o = j.at("omega");
    m.omega = {matrix_from_json(o.at("W1")), o.at("b1").get<Vector>(), matrix_from_json(o.at("W2")),
               o.at("b2").get<Vector>()};
    const auto& h = j.at("head");
    m.head = {matrix_from_json(h.at("W")), h.at("b").get<Vector>()};

    require(m.omega.b1.size() == m.omega.W1.rows() && m.omega.W2.cols() == m.omega.W1.rows() &&
                m.omega.b2.size() == m.omega.W2.rows() && m.head.b.size() == m.head.W.rows(),
            ErrorCode::shape_inconsistency, "model weights have inconsistent shapes");

    if (!j.at("basis").is_null()) {
      PseudoDomainModel pseudo;
      const auto& b = j.at("basis");
      SymmetricEigen eig{b.at("S").get<Vector>(), matrix_from_json(b.at("V"))};
      const std::size_t d = eig.vectors.rows();
      require(eig.vectors.cols() == d && eig.values.size() == d && d == m.omega.feature_dim(),
              ErrorCode::shape_inconsistency, "basis shape does not match the extractor");
      const SpectralWindow window{b.at("d_start").get<std::size_t>(), b.at("d_end").get<std::size_t>()};
      require(window.d_start < window.d_end && window.d_end <= d, ErrorCode::shape_inconsistency,
              "basis window out of range");
      pseudo.basis.eigenvectors = std::move(eig.vectors);
      pseudo.basis.eigenvalues = std::move(eig.values);
      pseudo.basis.d_start = window.d_start;
      pseudo.basis.d_end = window.d_end;
      pseudo.basis.truncated = pseudo.basis.eigenvectors.select_cols(window.d_start, window.d_end);
      const auto& c = j.at("centroids");
      pseudo.centroids.psi = matrix_from_json(c.at("psi"));
      require(pseudo.centroids.psi.rows() == c.at("K").get<std::size_t>() &&
                  pseudo.centroids.psi.cols() == window.width(),
              ErrorCode::shape_inconsistency, "centroid shape does not match the basis window");
      pseudo.centroids.final_cost = c.at("final_cost").get<double>();
      pseudo.centroids.iteration_count = c.at("iteration_count").get<std::size_t>();
      pseudo.created_at_epoch = c.at("created_at_epoch").get<std::size_t>();
      m.pseudo = std::move(pseudo);
    }
    require(m.head.W.cols() == m.omega.feature_dim() + m.embedding_dim(), ErrorCode::shape_inconsistency,
            "head width does not equal feature plus embedding width");
    return m;
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::corrupt_model, "corrupt model file");
  }
}

/// Writes to a sibling temp file and renames it into place.
inline void write_file_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(out), ErrorCode::io, "cannot open '" + tmp + "' for writing");
    out << contents;
    detail::require(static_cast<bool>(out.flush()), ErrorCode::io, "write failed for '" + tmp + "'");
  }
  detail::require(std::rename(tmp.c_str(), path.c_str()) == 0, ErrorCode::io, "cannot rename onto '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_model(const AdaptiveClassifier& model, const std::string& path) {
  write_file_atomically(path, model_to_json(model));
}

inline AdaptiveClassifier load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace adaclust
