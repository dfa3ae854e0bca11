#pragma once

// Record-by-record metric counter, written without confusion matrices.

#include <cstddef>
#include <string>
#include <vector>

namespace oracle {

struct NaiveClass {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
};

struct NaiveReport {
  std::vector<NaiveClass> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_f2 = 0.0;
};

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

inline double f_beta(double p, double r, double beta) {
  const double b2 = beta * beta;
  return safe_div((1.0 + b2) * p * r, b2 * p + r);
}

inline NaiveReport naive_report(const std::vector<std::string>& gold,
                                const std::vector<std::string>& pred,
                                const std::vector<std::string>& classes) {
  NaiveReport out;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
  out.accuracy = safe_div(static_cast<double>(hits), static_cast<double>(gold.size()));
  for (const auto& c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c && pred[i] == c) tp += 1;
      if (gold[i] != c && pred[i] == c) fp += 1;
      if (gold[i] == c && pred[i] != c) fn += 1;
    }
    NaiveClass m;
    m.precision = safe_div(tp, tp + fp);
    m.recall = safe_div(tp, tp + fn);
    m.f1 = f_beta(m.precision, m.recall, 1.0);
    m.f2 = f_beta(m.precision, m.recall, 2.0);
    out.per_class.push_back(m);
    out.macro_precision += m.precision / static_cast<double>(classes.size());
    out.macro_recall += m.recall / static_cast<double>(classes.size());
    out.macro_f1 += m.f1 / static_cast<double>(classes.size());
    out.macro_f2 += m.f2 / static_cast<double>(classes.size());
  }
  return out;
}

}  // namespace oracle
