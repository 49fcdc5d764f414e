#include "pcir/plot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace pcir::plot {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 70;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
}

// Axes box with horizontal grid lines and y tick labels for [lo, hi].
std::string y_axis(double lo, double hi, const std::string& label) {
  std::string s;
  const double h = kHeight - kTop - kBottom;
  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5.0;
    const double y = kTop + h * (1.0 - t / 5.0);
    s += fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", kLeft, y,
                     kWidth - kRight, y);
    s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y + 4, v);
  }
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft, kTop,
                   kWidth - kLeft - kRight, h);
  s += fmt::format("<text x=\"16\" y=\"{:.2f}\" transform=\"rotate(-90 16 {:.2f})\" text-anchor=\"middle\">{}</text>\n",
                   kTop + h / 2, kTop + h / 2, escape(label));
  return s;
}

double to_y(double v, double lo, double hi) {
  const double h = kHeight - kTop - kBottom;
  return kTop + h * (1.0 - (std::clamp(v, lo, hi) - lo) / (hi - lo));
}

}  // namespace

std::string auroc_bars_svg(const std::vector<std::pair<std::string, eval::EvalReport>>& reports,
                           const std::string& in_distribution_env) {
  std::size_t groups = 0;
  for (const auto& [name, r] : reports) groups += r.per_env.size();
  if (groups == 0) throw ConfigError("auroc_bars_svg: no report entries to plot");

  std::string s = header("AUROC per environment (transparent: in-distribution)");
  s += y_axis(0.0, 1.0, "AUROC");
  const double plot_w = kWidth - kLeft - kRight;
  const double slot = plot_w / static_cast<double>(groups);
  const double bar_w = slot * 0.6;
  std::size_t g = 0;
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const auto& [name, r] = reports[m];
    double id = std::nan("");
    for (const auto& e : r.per_env)
      if (e.env == in_distribution_env) id = e.auroc_mean;
    for (const auto& e : r.per_env) {
      const double x = kLeft + slot * (static_cast<double>(g) + 0.2);
      const double base = to_y(0.0, 0.0, 1.0);
      s += fmt::format("<g class=\"bar-group\" data-method=\"{}\" data-env=\"{}\">\n", escape(name), escape(e.env));
      if (!std::isnan(id)) {
        const double y = to_y(id, 0.0, 1.0);
        s += fmt::format(
            "<rect class=\"in-distribution\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
            "fill=\"{}\" fill-opacity=\"0.25\"/>\n",
            x, y, bar_w, base - y, color(m));
      }
      const double y = to_y(e.auroc_mean, 0.0, 1.0);
      s += fmt::format(
          "<rect class=\"shifted\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
          x + bar_w * 0.2, y, bar_w * 0.6, base - y, color(m));
      if (e.auroc_std > 0.0) {
        const double xc = x + bar_w / 2;
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n", xc,
                         to_y(e.auroc_mean - e.auroc_std, 0.0, 1.0), to_y(e.auroc_mean + e.auroc_std, 0.0, 1.0));
      }
      s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x + bar_w / 2,
                       kHeight - kBottom + 14, escape(e.env));
      s += "</g>\n";
      ++g;
    }
  }
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const double y = kHeight - 30 + 14.0 * static_cast<double>(m % 2);
    const double x = kLeft + 160.0 * static_cast<double>(m / 2);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", x, y - 9, color(m));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{} (lambda={})</text>\n", x + 14, y, escape(reports[m].first),
                     reports[m].second.lambda);
  }
  return s + "</svg>\n";
}

std::string ablation_svg(const std::vector<experiment::SweepRow>& rows) {
  if (rows.empty()) throw ConfigError("ablation_svg: sweep has no rows");
  std::vector<double> weights;
  std::vector<std::string> envs;
  for (const auto& r : rows) {
    if (std::find(weights.begin(), weights.end(), r.lambda) == weights.end()) weights.push_back(r.lambda);
    if (std::find(envs.begin(), envs.end(), r.env) == envs.end()) envs.push_back(r.env);
  }
  std::sort(weights.begin(), weights.end());

  // Log10 positions; weight 0 sits one decade left of the smallest positive.
  double min_pos = 1.0;
  for (double w : weights)
    if (w > 0.0) {
      min_pos = w;
      break;
    }
  auto position = [&](double w) { return w > 0.0 ? std::log10(w) : std::log10(min_pos) - 1.0; };
  const double xlo = position(weights.front()), xhi = position(weights.back());
  const double span = xhi > xlo ? xhi - xlo : 1.0;
  auto to_x = [&](double w) { return kLeft + 20 + (kWidth - kLeft - kRight - 40) * (position(w) - xlo) / span; };

  std::map<std::pair<std::string, double>, std::pair<double, int>> acc;
  double lo = 1.0, hi = 0.0;
  for (const auto& r : rows) {
    auto& a = acc[{r.env, r.lambda}];
    a.first += r.auroc;
    a.second += 1;
  }
  for (const auto& [k, a] : acc) {
    lo = std::min(lo, a.first / a.second);
    hi = std::max(hi, a.first / a.second);
  }
  lo = std::max(0.0, std::floor(lo * 10.0 - 0.5) / 10.0);
  hi = std::min(1.0, std::ceil(hi * 10.0 + 0.5) / 10.0);
  if (!(hi > lo)) hi = lo + 0.1;

  std::string s = header("Mean AUROC against regularization weight");
  s += y_axis(lo, hi, "AUROC");
  for (double w : weights) {
    const double x = to_x(w);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x, kHeight - kBottom + 14,
                     w == 0.0 ? std::string("0") : fmt::format("{:g}", w));
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">lambda</text>\n",
                   kLeft + (kWidth - kLeft - kRight) / 2, kHeight - kBottom + 30);
  for (std::size_t e = 0; e < envs.size(); ++e) {
    std::string pts;
    for (double w : weights) {
      const auto it = acc.find({envs[e], w});
      if (it == acc.end()) continue;
      pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", to_x(w),
                         to_y(it->second.first / it->second.second, lo, hi));
    }
    s += fmt::format("<polyline class=\"ablation\" data-env=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" "
                     "stroke-width=\"2\"/>\n",
                     escape(envs[e]), pts, color(e));
    const double y = kHeight - 20;
    const double x = kLeft + 80.0 * static_cast<double>(e);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", x, y - 9, color(e));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x + 14, y, escape(envs[e]));
  }
  return s + "</svg>\n";
}

std::string pca_scatter_svg(const io::RepsTable& t) {
  if (t.reps.rows() < 2 || t.reps.cols() < 1) throw ConfigError("pca_scatter_svg: need at least 2 representations");
  if (static_cast<Index>(t.env.size()) != t.reps.rows()) throw ConfigError("pca_scatter_svg: env column mismatch");
  const Matrix centered = t.reps.rowwise() - t.reps.colwise().mean();
  Matrix proj(centered.rows(), 2);
  proj.setZero();
  if (centered.cols() == 1) {
    proj.col(0) = centered.col(0);
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Index d = centered.cols();
    for (Index c = 0; c < 2; ++c) {
      Eigen::VectorXd axis = es.eigenvectors().col(d - 1 - c);
      Index top = 0;
      axis.cwiseAbs().maxCoeff(&top);
      if (axis(top) < 0.0) axis = -axis;
      proj.col(c) = centered * axis;
    }
  }
  const double x0 = proj.col(0).minCoeff(), x1 = proj.col(0).maxCoeff();
  const double y0 = proj.col(1).minCoeff(), y1 = proj.col(1).maxCoeff();
  const double sx = x1 > x0 ? x1 - x0 : 1.0, sy = y1 > y0 ? y1 - y0 : 1.0;
  const double w = kWidth - kLeft - kRight, h = kHeight - kTop - kBottom;

  const std::set<int> env_set(t.env.begin(), t.env.end());
  const std::vector<int> envs(env_set.begin(), env_set.end());
  auto env_index = [&](int e) {
    return static_cast<std::size_t>(std::find(envs.begin(), envs.end(), e) - envs.begin());
  };

  std::string s = header("Representations, first two principal components");
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft, kTop,
                   w, h);
  for (Index i = 0; i < proj.rows(); ++i) {
    const double px = kLeft + w * (proj(i, 0) - x0) / sx;
    const double py = kTop + h * (1.0 - (proj(i, 1) - y0) / sy);
    const int e = t.env[static_cast<std::size_t>(i)];
    s += fmt::format("<circle class=\"point\" data-env=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\" "
                     "fill-opacity=\"0.6\"/>\n",
                     e, px, py, color(env_index(e)));
  }
  for (std::size_t k = 0; k < envs.size(); ++k) {
    const double x = kLeft + 90.0 * static_cast<double>(k), y = kHeight - 30;
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", x, y - 9, color(k));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">env {}</text>\n", x + 14, y, envs[k]);
  }
  return s + "</svg>\n";
}

}  // namespace pcir::plot
