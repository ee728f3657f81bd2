#include "drmatch/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace drmatch {

double asmd(const Vector& x, const Treatment& w, const Vector* unit_weights) {
  const Index n = x.size();
  if (w.size() != n) throw DataError("covariate and treatment lengths differ");
  if (unit_weights != nullptr && unit_weights->size() != n) throw DataError("weight length differs");

  double wt[2] = {0.0, 0.0}, wsum[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0}, sum[2] = {0.0, 0.0};
  for (Index i = 0; i < n; ++i) {
    const int arm = w[i];
    const double u = unit_weights ? (*unit_weights)[i] : 1.0;
    if (u < 0.0) throw DataError("unit weights must be nonnegative");
    wt[arm] += u;
    wsum[arm] += u * x[i];
    count[arm] += 1.0;
    sum[arm] += x[i];
  }
  if (!(wt[0] > 0.0) || !(wt[1] > 0.0)) throw DataError("both arms need positive weight");
  if (count[0] < 2.0 || count[1] < 2.0) throw DataError("ASMD needs at least two units per arm");

  double ss[2] = {0.0, 0.0};
  const double mean_raw[2] = {sum[0] / count[0], sum[1] / count[1]};
  for (Index i = 0; i < n; ++i) {
    const double d = x[i] - mean_raw[w[i]];
    ss[w[i]] += d * d;
  }
  const double var_c = ss[0] / (count[0] - 1.0);
  const double var_t = ss[1] / (count[1] - 1.0);
  const double gap = std::abs(wsum[1] / wt[1] - wsum[0] / wt[0]);
  const double pooled = std::sqrt((var_t + var_c) / 2.0);
  const double scale = std::max({1.0, std::abs(mean_raw[0]), std::abs(mean_raw[1])});
  if (pooled <= 1e-14 * scale) {
    if (gap <= 1e-12 * scale) return 0.0;
    throw DataError("degenerate covariate");
  }
  return gap / pooled;
}

namespace {

BalanceSummary summarize(const std::vector<CovariateBalance>& rows, bool after, double threshold) {
  BalanceSummary s;
  double total = 0.0, unbalanced = 0.0;
  Index n_unbalanced = 0;
  for (const auto& r : rows) {
    const double v = after ? r.after : r.before;
    total += v;
    s.max = std::max(s.max, v);
    if (r.before > threshold) {
      unbalanced += v;
      ++n_unbalanced;
    }
  }
  s.mean = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  s.unbalanced_mean =
      n_unbalanced > 0 ? unbalanced / static_cast<double>(n_unbalanced) : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace

BalanceReport balance_report(const Dataset& data, const Vector& after_weights) {
  data.validate(true);
  BalanceReport report;
  const Matrix& x = data.x.values();
  for (Index j = 0; j < x.cols(); ++j) {
    const Vector col = x.col(j);
    CovariateBalance row;
    row.name = j < static_cast<Index>(data.covariate_names.size()) ? data.covariate_names[static_cast<std::size_t>(j)]
                                                                    : "X" + std::to_string(j + 1);
    row.before = asmd(col, data.w);
    row.after = asmd(col, data.w, &after_weights);
    report.covariates.push_back(std::move(row));
  }
  for (const auto& r : report.covariates) {
    if (r.before > report.threshold) ++report.n_unbalanced;
  }
  report.before = summarize(report.covariates, false, report.threshold);
  report.after = summarize(report.covariates, true, report.threshold);
  return report;
}

BalanceReport balance_report(const Dataset& data, const MatchResult& match) {
  if (match.size() != data.size()) throw DataError("match result does not fit the dataset");
  return balance_report(data, match.weights);
}

std::string balance_svg(const BalanceReport& report, const std::string& title) {
  const double width = 720.0, height = 420.0;
  const double left = 60.0, right = 20.0, top = 40.0, bottom = 50.0;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  double y_max = report.threshold * 1.5;
  for (const auto& r : report.covariates) y_max = std::max({y_max, r.before, r.after});
  y_max *= 1.05;
  const std::size_t n = std::max<std::size_t>(report.covariates.size(), 1);
  const auto px = [&](std::size_t i) {
    return left + (n == 1 ? plot_w / 2.0 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1));
  };
  const auto py = [&](double v) { return top + plot_h * (1.0 - v / y_max); };

  std::ostringstream out;
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::string escaped;
  for (char c : title) {
    if (c == '<') escaped += "&lt;";
    else if (c == '>') escaped += "&gt;";
    else if (c == '&') escaped += "&amp;";
    else escaped += c;
  }
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escaped
      << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n"
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                left, top, left, top + plot_h, left, top + plot_h, left + plot_w, top + plot_h);
  out << buf;
  for (int k = 0; k <= 4; ++k) {
    const double v = y_max * k / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\">%.2f</text>\n", left - 6,
                  py(v) + 4, v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n",
                left, py(report.threshold), left + plot_w, py(report.threshold));
  out << buf;
  for (std::size_t i = 0; i < report.covariates.size(); ++i) {
    const auto& r = report.covariates[i];
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"#d62728\"/>"
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"#1f77b4\"/>\n",
                  px(i), py(r.before), px(i), py(r.after));
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">Covariate index</text>\n"
                "<text x=\"16\" y=\"%.2f\" transform=\"rotate(-90 16 %.2f)\" text-anchor=\"middle\">ASMD</text>\n",
                left + plot_w / 2, height - 14, top + plot_h / 2, top + plot_h / 2);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#d62728\"/><text x=\"%.2f\" y=\"%.2f\">Before</text>\n"
                "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#1f77b4\"/><text x=\"%.2f\" y=\"%.2f\">After</text>\n",
                width - 150, top + 10, width - 142, top + 14, width - 150, top + 28, width - 142, top + 32);
  out << buf;
  out << "</svg>\n";
  return out.str();
}

}  // namespace drmatch
