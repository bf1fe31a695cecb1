#include "serialize.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace vse {
namespace {

using nlohmann::ordered_json;

ordered_json vector_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

ordered_json point_json(const Vector& v) { return v.size() == 1 ? ordered_json(v(0)) : vector_json(v); }

Vector parse_point(const nlohmann::json& j, Index expected_dim) {
  if (j.is_number()) {
    if (expected_dim > 1) throw InputError("paths: inconsistent dimensions");
    return Vector::Constant(1, j.get<double>());
  }
  if (!j.is_array() || j.empty()) throw InputError("paths: entries must be numbers or non-empty arrays");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("paths: non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  if (expected_dim > 0 && v.size() != expected_dim) throw InputError("paths: inconsistent dimensions");
  return v;
}

std::vector<Vector> parse_points(const nlohmann::json& doc, const char* key) {
  std::vector<Vector> out;
  if (!doc.contains(key)) return out;
  const auto& arr = doc.at(key);
  if (!arr.is_array()) throw InputError(std::string("paths: '") + key + "' must be an array");
  Index dim = 0;
  for (const auto& e : arr) {
    out.push_back(parse_point(e, dim));
    dim = out.back().size();
  }
  return out;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'");
  }
}

std::string paths_json(const JumpPaths& paths) {
  ordered_json doc;
  doc["z"] = ordered_json::array();
  for (Index z : paths.z) doc["z"].push_back(z + 1);
  doc["x"] = ordered_json::array();
  for (const auto& x : paths.x) doc["x"].push_back(point_json(x));
  doc["y"] = ordered_json::array();
  for (const auto& y : paths.y) doc["y"].push_back(point_json(y));
  return doc.dump() + "\n";
}

JumpPaths parse_paths(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("paths: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("y")) throw InputError("paths: missing 'y'");
  JumpPaths out;
  out.y = parse_points(doc, "y");
  if (out.y.empty()) throw InputError("paths: 'y' is empty");
  out.x = parse_points(doc, "x");
  if (doc.contains("z")) {
    if (!doc["z"].is_array()) throw InputError("paths: 'z' must be an array");
    for (const auto& z : doc["z"]) {
      if (!z.is_number_integer() || z.get<long long>() < 1) throw InputError("paths: regimes are 1-based integers");
      out.z.push_back(static_cast<Index>(z.get<long long>() - 1));
    }
  }
  return out;
}

std::string posterior_json(const VjgmPosterior& post, const std::vector<ProductMarginal>* filtering) {
  auto marginal_arrays = [](const std::vector<ProductMarginal>& qs, ordered_json& f, ordered_json& mean,
                            ordered_json& cov) {
    f = mean = cov = ordered_json::array();
    for (const auto& q : qs) {
      f.push_back(vector_json(q.f.probs));
      mean.push_back(vector_json(q.g.mean));
      cov.push_back(matrix_json(q.g.cov));
    }
  };
  ordered_json doc;
  ordered_json f, g_mean, g_cov;
  marginal_arrays(post.marginals, f, g_mean, g_cov);
  doc["f"] = std::move(f);
  doc["g_mean"] = std::move(g_mean);
  doc["g_cov"] = std::move(g_cov);

  ordered_json f_star = ordered_json::array();
  ordered_json g_star = ordered_json::array();
  ordered_json log_kappa = ordered_json::array();
  for (const auto& rep : post.representers) {
    f_star.push_back(vector_json(rep.f_star.probs));
    ordered_json per_regime = ordered_json::array();
    for (const auto& g : rep.g_star) per_regime.push_back({{"mean", vector_json(g.mean)}, {"cov", matrix_json(g.cov)}});
    g_star.push_back(std::move(per_regime));
    log_kappa.push_back(rep.log_kappa);
  }
  doc["f_star"] = std::move(f_star);
  doc["g_star"] = std::move(g_star);
  doc["log_kappa"] = std::move(log_kappa);

  ordered_json rev_f = ordered_json::array();
  ordered_json slope = ordered_json::array();
  ordered_json offset = ordered_json::array();
  ordered_json rev_q = ordered_json::array();
  for (const auto& k : post.reverse_kernels) {
    rev_f.push_back(matrix_json(k.f_rev.matrix));
    slope.push_back(matrix_json(k.g_rev.slope));
    offset.push_back(vector_json(k.g_rev.offset));
    rev_q.push_back(matrix_json(k.g_rev.cov));
  }
  doc["rev_f"] = std::move(rev_f);
  doc["rev_a_slope"] = std::move(slope);
  doc["rev_a_offset"] = std::move(offset);
  doc["rev_q"] = std::move(rev_q);

  if (filtering) {
    ordered_json ff, fm, fc;
    marginal_arrays(*filtering, ff, fm, fc);
    doc["filter_f"] = std::move(ff);
    doc["filter_g_mean"] = std::move(fm);
    doc["filter_g_cov"] = std::move(fc);
  }
  doc["elbo_trace"] = post.elbo_trace;
  doc["elbo"] = post.elbo;
  return doc.dump(1) + "\n";
}

}  // namespace vse
