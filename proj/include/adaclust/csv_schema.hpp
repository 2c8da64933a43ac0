#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "adaclust/csv.hpp"
#include "adaclust/lodo.hpp"
#include "adaclust/probe.hpp"
#include "adaclust/theory.hpp"
#include "adaclust/train.hpp"

// Column layouts of every CSV the command-line tool emits. Bump the version
// whenever a header changes; golden tests pin the exact strings.
namespace adaclust::csv_schema {

inline constexpr int kVersion = 1;

inline constexpr std::string_view kTrainLog = "epoch,clustered,train_loss,cluster_cost,val_accuracy,selected";
inline constexpr std::string_view kPredictions = "row,label,predicted,matched_cluster";
inline constexpr std::string_view kLodo =
    "seed,variant,heldout_domain,test_accuracy,val_accuracy,selected_epoch,clustering_rounds,cluster_domain_nmi,"
    "train_points,term_cover,term_n,term_N,bound_total";
inline constexpr std::string_view kLodoSummary = "variant,rows,mean_accuracy,stddev_over_seeds";
inline constexpr std::string_view kAblate = "axis,value,rows,mean_accuracy,stddev_over_seeds";
inline constexpr std::string_view kAblateRowsPrefix = "axis,value";
inline constexpr std::string_view kTheory = "operation,inputs,value,stderr,pass";
inline constexpr std::string_view kProbe = "d_start,d_end,domain_acc,class_acc,nmi_domain,nmi_class,renorm_nmi";

inline std::string ablate_rows_header() { return std::string(kAblateRowsPrefix) + "," + std::string(kLodo); }

inline std::string train_log_row(const EpochLog& e, std::size_t selected_epoch) {
  return std::to_string(e.epoch) + "," + (e.clustered ? "1" : "0") + "," + format_double(e.train_loss) + "," +
         format_double(e.cluster_cost) + "," + format_double(e.val_accuracy) + "," +
         (e.epoch == selected_epoch ? "1" : "0");
}

inline std::string lodo_row(const LodoRow& r, const std::optional<theory::BoundTerms>& terms) {
  std::string out = std::to_string(r.seed) + "," + to_string(r.variant) + "," + std::to_string(r.heldout_domain) + "," +
                    format_double(r.test_accuracy) + "," + format_double(r.val_accuracy) + "," +
                    std::to_string(r.selected_epoch) + "," + std::to_string(r.clustering_rounds) + "," +
                    format_double(r.cluster_domain_nmi) + "," + std::to_string(r.train_points);
  if (terms)
    out += "," + format_double(terms->term_cover) + "," + format_double(terms->term_n) + "," +
           format_double(terms->term_N) + "," + format_double(terms->total);
  else
    out += ",nan,nan,nan,nan";
  return out;
}

inline std::string probe_row(const ProbeRow& r) {
  return std::to_string(r.d_start) + "," + std::to_string(r.d_end) + "," + format_double(r.domain_acc) + "," +
         format_double(r.class_acc) + "," + format_double(r.nmi_domain) + "," + format_double(r.nmi_class) + "," +
         format_double(r.renorm_nmi);
}

/// `pass` is empty for rows that are reports rather than checks.
inline std::string theory_row(std::string_view operation, std::string_view inputs, double value, double std_error,
                              std::optional<bool> pass) {
  std::string out(operation);
  out += ",";
  out += inputs;
  out += "," + format_double(value) + "," + format_double(std_error) + ",";
  if (pass) out += *pass ? "PASS" : "FAIL";
  return out;
}

}  // namespace adaclust::csv_schema
