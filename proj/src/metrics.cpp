#include "modpipe/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "modpipe/error.hpp"
#include "modpipe/labels.hpp"

namespace modpipe {

using nlohmann::ordered_json;

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

ConfusionMatrix confusion(std::span<const std::string> gold, std::span<const std::string> pred,
                          std::vector<std::string> classes) {
  if (gold.size() != pred.size()) {
    throw ContractViolation("confusion: " + std::to_string(gold.size()) + " gold labels but " +
                            std::to_string(pred.size()) + " predictions");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!index.emplace(classes[i], i).second) {
      throw ContractViolation("confusion: duplicate class '" + classes[i] + "'");
    }
  }
  const std::size_t k = classes.size();
  ConfusionMatrix cm{std::move(classes), std::vector<std::vector<std::size_t>>(k, std::vector<std::size_t>(k, 0))};
  const auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw InputError("confusion: label '" + label + "' is not in the class list");
    return it->second;
  };
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm.counts[lookup(gold[i])][lookup(pred[i])];
  return cm;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

EvaluationReport macro_report(const ConfusionMatrix& cm) {
  EvaluationReport report;
  report.confusion = cm;
  const std::size_t k = cm.classes.size();
  const std::size_t total = cm.total();
  report.scored_count = total;
  report.empty = total == 0;
  report.accuracy = ratio(static_cast<double>(cm.trace()), static_cast<double>(total));
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(cm.counts[c][c]);
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(cm.counts[c][j]);
      col += static_cast<double>(cm.counts[j][c]);
    }
    ClassMetrics m;
    m.label = cm.classes[c];
    m.support = static_cast<std::size_t>(row);
    m.precision = ratio(tp, col);
    m.recall = ratio(tp, row);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.f2 = ratio(5.0 * m.precision * m.recall, 4.0 * m.precision + m.recall);
    report.per_class.push_back(m);
  }
  if (k > 0) {
    for (const auto& m : report.per_class) {
      report.macro_precision += m.precision;
      report.macro_recall += m.recall;
      report.macro_f1 += m.f1;
      report.macro_f2 += m.f2;
    }
    report.macro_precision /= static_cast<double>(k);
    report.macro_recall /= static_cast<double>(k);
    report.macro_f1 /= static_cast<double>(k);
    report.macro_f2 /= static_cast<double>(k);
  }
  return report;
}

namespace {

template <std::size_t N>
std::vector<std::string> names(const std::array<std::string_view, N>& values) {
  return {values.begin(), values.end()};
}

/// Pairs each gold record with its prediction.
struct Matched {
  const Record* record;
  const Prediction* prediction;  // null when missing
};

std::vector<Matched> match(std::span<const Prediction> predictions, std::span<const Record> gold,
                           Task task) {
  std::map<std::string_view, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (p.task != task) {
      throw InputError("prediction '" + p.record_id + "' is for task " +
                       std::string(to_string(p.task)) + ", expected task " +
                       std::string(to_string(task)));
    }
    if (!by_id.emplace(p.record_id, &p).second) {
      throw InputError("duplicate prediction for '" + p.record_id + "'");
    }
  }
  std::vector<Matched> out;
  std::size_t found = 0;
  for (const auto& r : gold) {
    auto it = by_id.find(r.id);
    const Prediction* p = it == by_id.end() ? nullptr : it->second;
    found += p != nullptr;
    out.push_back({&r, p});
  }
  if (found != by_id.size()) {
    for (const auto& [id, p] : by_id) {
      const bool known = std::any_of(gold.begin(), gold.end(), [&](const Record& r) { return r.id == id; });
      if (!known) throw InputError("prediction for unknown record '" + std::string(id) + "'");
    }
  }
  return out;
}

/// Scores one label slot. Records lacking either side are excluded.
EvaluationReport score_slot(const std::vector<Matched>& matched, std::string name,
                            std::string_view key, const LabelSelector& gold_selector,
                            std::vector<std::string> classes) {
  std::vector<std::string> gold;
  std::vector<std::string> pred;
  std::size_t failed = 0;
  std::size_t excluded = 0;
  for (const auto& m : matched) {
    if (!m.prediction || m.prediction->failed) {
      ++failed;
      continue;
    }
    const auto g = gold_selector(*m.record);
    auto it = m.prediction->labels.find(std::string(key));
    if (!g || it == m.prediction->labels.end() || !it->second) {
      ++excluded;
      continue;
    }
    gold.push_back(*g);
    pred.push_back(*it->second);
  }
  EvaluationReport report = macro_report(confusion(gold, pred, std::move(classes)));
  report.name = std::move(name);
  report.failed_count = failed;
  report.excluded_count = excluded;
  return report;
}

}  // namespace

TaskScore score_task1(std::span<const Prediction> predictions, std::span<const Record> gold) {
  const auto matched = match(predictions, gold, Task::kHopeHate);
  TaskScore score{Task::kHopeHate, {}, std::nullopt};
  score.reports.push_back(score_slot(matched, "task1", kTask1Key, select_label(LabelField::kTask1),
                                     names(kHopeLabelNames)));
  return score;
}

TaskScore score_task2(std::span<const Prediction> predictions, std::span<const Record> gold) {
  const auto matched = match(predictions, gold, Task::kMultiTask);
  TaskScore score{Task::kMultiTask, {}, std::nullopt};
  score.reports.push_back(score_slot(matched, "emotion", kEmotionKey,
                                     select_label(LabelField::kEmotion), names(kEmotionNames)));
  score.reports.push_back(score_slot(matched, "offensive", kOffensiveKey,
                                     select_label(LabelField::kOffensive), names(kOffensiveNames)));
  score.reports.push_back(score_slot(matched, "hate", kHateKey, select_label(LabelField::kHateText),
                                     names(kTextHateNames)));

  EvaluationReport combined;
  combined.name = "combined_mean";
  std::size_t used = 0;
  for (const auto& r : score.reports) {
    if (r.empty) continue;
    ++used;
    combined.accuracy += r.accuracy;
    combined.macro_precision += r.macro_precision;
    combined.macro_recall += r.macro_recall;
    combined.macro_f1 += r.macro_f1;
    combined.macro_f2 += r.macro_f2;
  }
  if (used == 0) {
    combined.empty = true;
  } else {
    const double n = static_cast<double>(used);
    combined.accuracy /= n;
    combined.macro_precision /= n;
    combined.macro_recall /= n;
    combined.macro_f1 /= n;
    combined.macro_f2 /= n;
  }
  combined.scored_count = used;
  combined.failed_count = score.reports.front().failed_count;
  score.combined = combined;
  return score;
}

TaskScore score_task3(std::span<const Prediction> predictions, std::span<const Record> gold) {
  const auto matched = match(predictions, gold, Task::kMeme);
  TaskScore score{Task::kMeme, {}, std::nullopt};
  score.reports.push_back(score_slot(matched, "meme_hate", kMemeKey,
                                     select_label(LabelField::kMemeHate), names(kMemeHateNames)));
  return score;
}

TaskScore score_task(Task task, std::span<const Prediction> predictions,
                     std::span<const Record> gold) {
  switch (task) {
    case Task::kHopeHate: return score_task1(predictions, gold);
    case Task::kMultiTask: return score_task2(predictions, gold);
    case Task::kMeme: return score_task3(predictions, gold);
  }
  throw ContractViolation("unknown task");
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

ordered_json report_json(const EvaluationReport& report) {
  ordered_json doc;
  doc["name"] = report.name;
  doc["empty"] = report.empty;
  doc["scored_count"] = report.scored_count;
  doc["excluded_count"] = report.excluded_count;
  doc["failed_count"] = report.failed_count;
  doc["accuracy"] = report.accuracy;
  doc["macro_precision"] = report.macro_precision;
  doc["macro_recall"] = report.macro_recall;
  doc["macro_f1"] = report.macro_f1;
  doc["macro_f2"] = report.macro_f2;
  ordered_json per_class = ordered_json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back({{"label", m.label},
                         {"support", m.support},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"f2", m.f2}});
  }
  doc["per_class"] = std::move(per_class);
  doc["confusion"] = {{"classes", report.confusion.classes},
                      {"counts", report.confusion.counts}};
  return doc;
}

ordered_json score_json(const TaskScore& score) {
  ordered_json doc;
  doc["task"] = static_cast<int>(score.task);
  ordered_json reports = ordered_json::array();
  for (const auto& r : score.reports) reports.push_back(report_json(r));
  doc["reports"] = std::move(reports);
  if (score.combined) {
    const auto& c = *score.combined;
    doc["combined"] = {{"description", "unweighted mean over non-empty sub-task reports"},
                       {"sub_tasks_used", c.scored_count},
                       {"accuracy", c.accuracy},
                       {"macro_precision", c.macro_precision},
                       {"macro_recall", c.macro_recall},
                       {"macro_f1", c.macro_f1},
                       {"macro_f2", c.macro_f2}};
  }
  return doc;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_table(const TaskScore& score) {
  std::ostringstream out;
  out << "task " << static_cast<int>(score.task) << '\n';
  for (const auto& r : score.reports) {
    std::size_t width = 9;
    for (const auto& m : r.per_class) width = std::max(width, m.label.size() + 2);
    out << '\n' << r.name << "  scored=" << r.scored_count << " excluded=" << r.excluded_count
        << " failed=" << r.failed_count << '\n';
    if (r.empty) {
      out << "  (nothing scorable)\n";
      continue;
    }
    out << "  " << pad("class", width) << pad("support", 9) << pad("prec", 9) << pad("recall", 9)
        << pad("f1", 9) << "f2\n";
    for (const auto& m : r.per_class) {
      out << "  " << pad(m.label, width) << pad(std::to_string(m.support), 9)
          << pad(fixed(m.precision), 9) << pad(fixed(m.recall), 9) << pad(fixed(m.f1), 9)
          << fixed(m.f2) << '\n';
    }
    out << "  " << pad("macro", width) << pad("", 9) << pad(fixed(r.macro_precision), 9)
        << pad(fixed(r.macro_recall), 9) << pad(fixed(r.macro_f1), 9) << fixed(r.macro_f2) << '\n';
    out << "  accuracy " << fixed(r.accuracy) << '\n';
  }
  if (score.combined && !score.combined->empty) {
    const auto& c = *score.combined;
    out << "\ncombined (unweighted mean of " << c.scored_count << " sub-tasks)  accuracy "
        << fixed(c.accuracy) << "  macro_f1 " << fixed(c.macro_f1) << "  macro_f2 "
        << fixed(c.macro_f2) << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "gold\\pred";
  for (const auto& c : cm.classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out << cm.classes[i];
    for (std::size_t c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

}  // namespace modpipe
