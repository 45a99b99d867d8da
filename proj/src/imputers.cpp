#include "attrnoise/imputers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace attrnoise {

const char* to_string(ImputerMethod m) {
  switch (m) {
    case ImputerMethod::mean: return "mean";
    case ImputerMethod::median: return "median";
    case ImputerMethod::knn: return "knn";
    case ImputerMethod::softimpute: return "softimpute";
    case ImputerMethod::mice_lite: return "mice-lite";
    case ImputerMethod::mida: return "mida";
  }
  return "?";
}

std::optional<ImputerMethod> imputer_from_string(const std::string& s) {
  for (auto m : {ImputerMethod::mean, ImputerMethod::median, ImputerMethod::knn, ImputerMethod::softimpute,
                 ImputerMethod::mice_lite, ImputerMethod::mida})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

void ImputerSpec::validate() const {
  switch (method) {
    case ImputerMethod::knn:
      if (knn.k < 1) throw std::invalid_argument("knn: k must be >= 1");
      break;
    case ImputerMethod::softimpute:
      if (softimpute.lambda && !(*softimpute.lambda >= 0.0))
        throw std::invalid_argument("softimpute: lambda must be >= 0");
      if (softimpute.max_rank < 0) throw std::invalid_argument("softimpute: max_rank must be >= 0");
      if (softimpute.max_sweeps < 1) throw std::invalid_argument("softimpute: max_sweeps must be >= 1");
      if (!(softimpute.tolerance > 0.0)) throw std::invalid_argument("softimpute: tolerance must be > 0");
      break;
    case ImputerMethod::mice_lite:
      if (mice.sweeps < 1) throw std::invalid_argument("mice-lite: sweeps must be >= 1");
      if (!(mice.ridge >= 0.0)) throw std::invalid_argument("mice-lite: ridge must be >= 0");
      break;
    case ImputerMethod::mida:
      if (mida.width_step < 0) throw std::invalid_argument("mida: width_step must be >= 0");
      if (!(mida.corruption >= 0.0 && mida.corruption < 1.0))
        throw std::invalid_argument("mida: corruption must lie in [0, 1)");
      if (mida.iterations < 1) throw std::invalid_argument("mida: iterations must be >= 1");
      if (!(mida.optimizer.learning_rate > 0.0)) throw std::invalid_argument("mida: learning rate must be > 0");
      break;
    default:
      break;
  }
}

std::string ImputerSpec::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = to_string(method);
  switch (method) {
    case ImputerMethod::knn: j["k"] = knn.k; break;
    case ImputerMethod::softimpute:
      if (softimpute.lambda)
        j["lambda"] = *softimpute.lambda;
      else
        j["lambda"] = "0.1*sigma1";
      j["max_rank"] = softimpute.max_rank;
      j["max_sweeps"] = softimpute.max_sweeps;
      j["tolerance"] = softimpute.tolerance;
      break;
    case ImputerMethod::mice_lite:
      j["sweeps"] = mice.sweeps;
      j["ridge"] = mice.ridge;
      break;
    case ImputerMethod::mida:
      j["width_step"] = mida.width_step;
      j["corruption"] = mida.corruption;
      j["iterations"] = mida.iterations;
      j["learning_rate"] = mida.optimizer.learning_rate;
      break;
    default:
      break;
  }
  j["seed"] = seed;
  return j.dump();
}

namespace {

void check_inputs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols()) throw std::invalid_argument("impute: mask shape mismatch");
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (mask.col(c).sum() == 0.0)
      throw std::invalid_argument("impute: column " + std::to_string(c) + " has no observed entry");
}

Eigen::RowVectorXd observed_means(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask) {
  return (x.cwiseProduct(mask).colwise().sum().array() / mask.colwise().sum().array()).matrix();
}

// Observed cells from x, the rest from `fill` clamped to [0,1].
Eigen::MatrixXd merge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const Eigen::MatrixXd& fill) {
  return (mask.array() != 0.0).select(x, fill.cwiseMax(0.0).cwiseMin(1.0));
}

Eigen::MatrixXd mean_filled(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask) {
  const Eigen::RowVectorXd mu = observed_means(x, mask);
  Eigen::MatrixXd fill = mu.replicate(x.rows(), 1);
  return merge(x, mask, fill);
}

}  // namespace

Eigen::MatrixXd impute_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask) {
  check_inputs(x, mask);
  return mean_filled(x, mask);
}

Eigen::MatrixXd impute_median(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask) {
  check_inputs(x, mask);
  Eigen::MatrixXd fill(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      if (mask(r, c) != 0.0) v.push_back(x(r, c));
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    const double med = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    fill.col(c).setConstant(med);
  }
  return merge(x, mask, fill);
}

Eigen::MatrixXd impute_knn(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const KnnHyper& hyper) {
  check_inputs(x, mask);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (hyper.k < 1 || hyper.k > n - 1) throw std::invalid_argument("knn: k must lie in [1, n-1]");

  // Squared distance over mutually observed coordinates, rescaled by d / count.
  const Eigen::MatrixXd xm = x.cwiseProduct(mask);
  const Eigen::MatrixXd x2m = xm.cwiseProduct(x);
  Eigen::MatrixXd cross = x2m * mask.transpose();
  const Eigen::MatrixXd sq = cross + cross.transpose() - 2.0 * xm * xm.transpose();
  const Eigen::MatrixXd count = mask * mask.transpose();
  const Eigen::RowVectorXd mu = observed_means(x, mask);

  Eigen::MatrixXd out = x;
  std::vector<std::pair<double, Eigen::Index>> cand;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask.row(i).minCoeff() != 0.0) continue;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (mask(i, c) != 0.0) continue;
      cand.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || mask(j, c) == 0.0 || count(i, j) == 0.0) continue;
        const double dist = std::max(sq(i, j), 0.0) * double(d) / count(i, j);
        cand.emplace_back(dist, j);
      }
      if (cand.empty()) {
        out(i, c) = mu(c);
        continue;
      }
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(hyper.k), cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k), cand.end());
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += x(cand[t].second, c);
      out(i, c) = s / double(k);
    }
  }
  return merge(x, mask, out);
}

SoftImputeResult soft_impute(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const SoftImputeHyper& hyper) {
  check_inputs(x, mask);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const int full_rank = static_cast<int>(std::min(n, d));
  const int max_rank = hyper.max_rank > 0 ? std::min(hyper.max_rank, full_rank) : full_rank;

  Eigen::MatrixXd z = mean_filled(x, mask);
  SoftImputeResult result;
  if (hyper.lambda) {
    result.lambda = *hyper.lambda;
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(z);
    result.lambda = 0.1 * svd.singularValues()(0);
  }
  const Eigen::ArrayXXd observed = (mask.array() != 0.0).cast<double>();

  for (int sweep = 0; sweep < hyper.max_sweeps; ++sweep) {
    const Eigen::MatrixXd y = (mask.array() != 0.0).select(x, z);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = (svd.singularValues().array() - result.lambda).cwiseMax(0.0).matrix();
    int rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (k >= max_rank) s(k) = 0.0;
      if (s(k) > 0.0) ++rank;
    }
    const Eigen::MatrixXd z_new = svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal() *
                                  svd.matrixV().leftCols(rank).transpose();
    const double old_norm = z.squaredNorm();
    const double delta = (z_new - z).squaredNorm();
    z = z_new;
    result.rank = rank;
    const double fit = ((x - z).array() * observed).matrix().squaredNorm();
    result.objective.push_back(0.5 * fit + result.lambda * s.sum());
    if (old_norm > 0.0 && delta / old_norm < hyper.tolerance) break;
  }
  result.completed = merge(x, mask, z);
  return result;
}

MiceResult mice_lite(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const MiceHyper& hyper) {
  check_inputs(x, mask);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  MiceResult result;
  Eigen::MatrixXd cur = mean_filled(x, mask);

  std::vector<std::pair<double, Eigen::Index>> order;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double missing = double(n) - mask.col(c).sum();
    if (missing > 0) order.emplace_back(missing, c);
  }
  std::sort(order.begin(), order.end());
  double n_imputed = 0.0;
  for (const auto& o : order) n_imputed += o.first;
  if (order.empty() || d < 2) {
    result.completed = cur;
    return result;
  }

  for (int sweep = 0; sweep < hyper.sweeps; ++sweep) {
    double change = 0.0;
    for (const auto& [missing, c] : order) {
      std::vector<Eigen::Index> obs, mis, others;
      for (Eigen::Index r = 0; r < n; ++r) (mask(r, c) != 0.0 ? obs : mis).push_back(r);
      for (Eigen::Index k = 0; k < d; ++k)
        if (k != c) others.push_back(k);

      const Eigen::MatrixXd a = cur(obs, others);
      const Eigen::VectorXd y = cur(obs, c);
      const Eigen::RowVectorXd a_mean = a.colwise().mean();
      const double y_mean = y.mean();
      const Eigen::MatrixXd ac = a.rowwise() - a_mean;
      Eigen::MatrixXd gram = ac.transpose() * ac;
      gram.diagonal().array() += hyper.ridge;
      const Eigen::VectorXd w = gram.ldlt().solve(ac.transpose() * (y.array() - y_mean).matrix());

      for (auto r : mis) {
        double pred = y_mean + (cur(r, others) - a_mean).dot(w);
        pred = std::clamp(std::isfinite(pred) ? pred : y_mean, 0.0, 1.0);
        change += std::fabs(pred - cur(r, c));
        cur(r, c) = pred;
      }
    }
    result.sweep_change.push_back(change / n_imputed);
  }
  result.completed = merge(x, mask, cur);
  return result;
}

Eigen::MatrixXd impute_mida(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, const MidaHyper& hyper,
                            std::uint64_t seed) {
  check_inputs(x, mask);
  const auto d = static_cast<std::size_t>(x.cols());
  const auto step = static_cast<std::size_t>(hyper.width_step);
  using nn::Activation;
  using nn::LayerSpec;
  const std::vector<LayerSpec> arch{LayerSpec::dense(d, d + step, Activation::relu),
                                    LayerSpec::dense(d + step, d + 2 * step, Activation::relu),
                                    LayerSpec::dense(d + 2 * step, d + step, Activation::relu),
                                    LayerSpec::dense(d + step, d, Activation::sigmoid)};
  nn::ModelParams params = nn::init_params(arch, seed);
  auto adam = nn::AdamState::for_params(params, hyper.optimizer);

  const Eigen::MatrixXd filled = mean_filled(x, mask);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd noisy(filled.rows(), filled.cols());
  for (int it = 0; it < hyper.iterations; ++it) {
    for (Eigen::Index c = 0; c < filled.cols(); ++c)
      for (Eigen::Index r = 0; r < filled.rows(); ++r)
        noisy(r, c) = mask(r, c) != 0.0 && unit(rng) < hyper.corruption ? 0.0 : filled(r, c);
    auto fr = nn::forward(params, noisy);
    const auto grads = nn::backward(params, fr.cache, fr.output, filled, mask);
    nn::adam_step(params, grads, adam);
  }
  return merge(x, mask, nn::predict(params, filled));
}

Eigen::MatrixXd impute(const EncodedMatrix& encoded, const ImputerSpec& spec) {
  spec.validate();
  const auto& x = encoded.values;
  const auto& m = encoded.mask;
  switch (spec.method) {
    case ImputerMethod::mean: return impute_mean(x, m);
    case ImputerMethod::median: return impute_median(x, m);
    case ImputerMethod::knn: return impute_knn(x, m, spec.knn);
    case ImputerMethod::softimpute: return soft_impute(x, m, spec.softimpute).completed;
    case ImputerMethod::mice_lite: return mice_lite(x, m, spec.mice).completed;
    case ImputerMethod::mida: return impute_mida(x, m, spec.mida, spec.seed);
  }
  throw std::invalid_argument("impute: unknown method");
}

}  // namespace attrnoise
