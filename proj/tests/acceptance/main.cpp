// Exit gate: one PASS/FAIL line per criterion. Tolerances are fixed below.
#include "halbench/analyzer.hpp"
#include "halbench/catalog.hpp"
#include "halbench/errors.hpp"
#include "halbench/orchestrator.hpp"
#include "halbench/taxonomy.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace halbench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kReplayBudgetSeconds = 5.0;
constexpr double kCorpusBudgetSeconds = 10.0;
constexpr int kScorerCases = 2000;
constexpr double kDistanceTolerance = 1e-12;

const std::string kFixtures = HALBENCH_FIXTURES;
const std::string kMode = "Vehicle.Body.Windshield.Front.Wiping.Mode";
const std::string kSystemMode = "Vehicle.Body.Windshield.Front.Wiping.System.Mode";

struct Check {
  bool ok = true;
  std::ostringstream why;

  void require(bool condition, const std::string &message) {
    if (!condition && ok) {
      ok = false;
      why << message;
    }
  }
};

int failures = 0;

void criterion(const std::string &name, double budget_seconds,
               const std::function<void(Check &)> &body) {
  Check check;
  auto start = std::chrono::steady_clock::now();
  try {
    body(check);
  } catch (const std::exception &e) {
    check.require(false, std::string("exception: ") + e.what());
  }
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0)
    check.require(seconds < budget_seconds, "took " + std::to_string(seconds) + " s");
  if (!check.ok)
    ++failures;
  std::printf("%s  %-40s %7.0f ms  %s\n", check.ok ? "PASS" : "FAIL", name.c_str(),
              seconds * 1000, check.ok ? "" : check.why.str().c_str());
}

std::string fixture(const std::string &relative) { return kFixtures + "/" + relative; }

/// Transport that records every attempt and never talks to a network.
struct Tripwire {
  int factory_calls = 0;
  int post_calls = 0;

  TransportFactory factory() {
    return [this](int) -> std::unique_ptr<HttpTransport> {
      ++factory_calls;
      struct Wire : HttpTransport {
        Tripwire *owner;
        explicit Wire(Tripwire *o) : owner(o) {}
        HttpResponse post_json(const std::string &, const std::string &,
                               const std::map<std::string, std::string> &,
                               const std::string &) override {
          ++owner->post_calls;
          throw InfrastructureError("network use is forbidden here");
        }
      };
      return std::make_unique<Wire>(this);
    };
  }
};

ExperimentReport replay(const std::string &config, const TransportFactory &transport) {
  auto configs = load_run_configs(fixture(config));
  return run_experiment(configs.at(0), transport);
}

std::vector<int> tenths(const ExperimentReport &report) {
  std::vector<int> out;
  for (const auto &rec : report.iterations)
    out.push_back(rec.score.tenths());
  return out;
}

std::string show(const std::vector<int> &values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i)
    out += (i ? ", " : "") + std::to_string(values[i] / 10) + "." + std::to_string(values[i] % 10);
  return out + "]";
}

bool starts_with(const std::string &text, const std::string &prefix) {
  return text.rfind(prefix, 0) == 0;
}

void check_trajectory(Check &c, const ExperimentReport &r, const std::vector<int> &expected,
                      std::optional<int> solved_at) {
  c.require(tenths(r) == expected, "scores " + show(tenths(r)) + ", want " + show(expected));
  for (const auto &rec : r.iterations) {
    bool want = solved_at && rec.index == *solved_at;
    c.require(rec.success == want, "success flag wrong at iteration " + std::to_string(rec.index));
  }
  if (solved_at)
    c.require(r.outcome == ExperimentOutcome::Solved, "outcome is not solved");
}

// Segment-aware distance, written out independently of the library.
double brute_levenshtein(const std::string &a, const std::string &b) {
  std::vector<std::vector<double>> d(a.size() + 1, std::vector<double>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i)
    d[i][0] = static_cast<double>(i);
  for (std::size_t j = 0; j <= b.size(); ++j)
    d[0][j] = static_cast<double>(j);
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

std::vector<std::string> segments(const std::string &path) {
  std::vector<std::string> out;
  std::stringstream in(path);
  for (std::string s; std::getline(in, s, '.');)
    out.push_back(s);
  return out;
}

double brute_distance(const std::string &x, const std::string &y) {
  auto a = segments(x), b = segments(y);
  std::vector<std::vector<double>> d(a.size() + 1, std::vector<double>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i)
    d[i][0] = static_cast<double>(i);
  for (std::size_t j = 0; j <= b.size(); ++j)
    d[0][j] = static_cast<double>(j);
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j) {
      double longest = static_cast<double>(std::max(a[i - 1].size(), b[j - 1].size()));
      double sub = longest == 0 ? 0 : brute_levenshtein(a[i - 1], b[j - 1]) / longest;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + sub});
    }
  double n = static_cast<double>(std::max(a.size(), b.size()));
  return n == 0 ? 0 : d[a.size()][b.size()] / n;
}

std::vector<std::string> read_lines(const std::string &path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#')
      out.push_back(line);
  return out;
}

std::string capture_command(const std::string &command, int &status) {
  std::string out;
  FILE *pipe = ::popen(command.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buffer{};
  std::size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    out.append(buffer.data(), n);
  status = ::pclose(pipe);
  return out;
}

Diagnostic random_diagnostic(std::mt19937 &rng) {
  static const char *texts[] = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<int> leaf(0, 8), penalty(0, 2), text(0, 5);
  Diagnostic d;
  d.taxonomy_leaf = kAllLeaves[leaf(rng)];
  d.penalty_class = static_cast<PenaltyClass>(penalty(rng));
  d.description = texts[text(rng)];
  d.source_stage = d.taxonomy_leaf == TaxonomyLeaf::SyntaxViolation ? SourceStage::Parse
                                                                     : SourceStage::Runtime;
  return d;
}

int oracle_tenths(const std::vector<Diagnostic> &diagnostics) {
  std::set<std::pair<int, std::string>> exec, misuse;
  for (const auto &d : diagnostics) {
    if (d.penalty_class == PenaltyClass::ExecError)
      exec.insert({static_cast<int>(d.taxonomy_leaf), d.description});
    if (d.penalty_class == PenaltyClass::SignalMisuse)
      misuse.insert({static_cast<int>(d.taxonomy_leaf), d.description});
  }
  return std::max(0, 10 - 2 * static_cast<int>(exec.size()) - static_cast<int>(misuse.size()));
}

} // namespace

int main() {
  Tripwire tripwire;

  criterion("actuator repair replay [0.8, 0.9, 1.0]", kReplayBudgetSeconds, [&](Check &c) {
    auto r = replay("replay/actuator_repair/config.json", tripwire.factory());
    check_trajectory(c, r, {8, 9, 10}, 2);
    if (r.iterations.size() == 3) {
      c.require(r.iterations[0].description == "set target value for non-actuator is not allowed",
                "iteration 0 description: " + r.iterations[0].description);
      c.require(starts_with(r.iterations[1].description, "wrong signal: " + kSystemMode),
                "iteration 1 description: " + r.iterations[1].description);
      c.require(r.iterations[2].diagnostics.empty(), "iteration 2 has diagnostics");
    }
  });

  criterion("type repair replay [0.9, 1.0]", kReplayBudgetSeconds, [&](Check &c) {
    auto r = replay("replay/type_repair/config.json", tripwire.factory());
    check_trajectory(c, r, {9, 10}, 1);
    if (!r.iterations.empty())
      c.require(starts_with(r.iterations[0].description, "setting int for string variable"),
                "iteration 0 description: " + r.iterations[0].description);
  });

  criterion("refused repair replay flat 0.9", kReplayBudgetSeconds, [&](Check &c) {
    auto r = replay("replay/refused_repair/config.json", tripwire.factory());
    check_trajectory(c, r, {9, 9, 9}, std::nullopt);
    c.require(r.outcome == ExperimentOutcome::Refused || r.outcome == ExperimentOutcome::Exhausted,
              "outcome " + std::string(to_string(r.outcome)));
    if (r.iterations.size() == 3) {
      c.require(starts_with(r.iterations[0].description, "wrong signal: " + kSystemMode),
                "iteration 0 description: " + r.iterations[0].description);
      for (int i : {1, 2})
        c.require(r.iterations[i].description == "Wipers are still on, when hood is open",
                  "iteration " + std::to_string(i) + " description: " + r.iterations[i].description);
    }
  });

  criterion("seeded-defect corpus detection", kCorpusBudgetSeconds, [&](Check &c) {
    auto labels = json::parse(std::ifstream(fixture("corpus/labels.json")));
    auto catalog = load_catalog_file(fixture("appendix.vss"));
    auto surface = load_surface_file(fixture("reference.surface")).with_signal_model(catalog);
    TaskSignalSpec expected;
    for (const auto &s : labels.at("expected_signals"))
      expected.signals.push_back({s.at("role"), s.at("path")});
    RunConfig base = load_run_configs(fixture("replay/actuator_repair/config.json")).at(0);
    std::set<std::string> descriptions;
    std::size_t detected = 0;
    for (const auto &entry : labels.at("entries")) {
      std::string file = fixture("corpus/" + entry.at("file").get<std::string>());
      std::ifstream in(file, std::ios::binary);
      std::string source((std::istreambuf_iterator<char>(in)), {});
      c.require(!source.empty(), "cannot read " + file);
      std::vector<Diagnostic> found;
      if (entry.at("mode") == "static") {
        found = analyze_source(source, surface, catalog, expected);
      } else {
        auto config = base;
        config.recorded_runs_ref = fixture("corpus/" + entry.at("recorded_runs").get<std::string>());
        auto experiment = prepare_experiment(config, tripwire.factory());
        found = evaluate_code(source, experiment).diagnostics;
      }
      auto leaf = parse_taxonomy_leaf(entry.at("leaf").get<std::string>());
      auto needle = entry.at("needle").get<std::string>();
      bool hit = std::any_of(found.begin(), found.end(), [&](const Diagnostic &d) {
        return d.taxonomy_leaf == leaf && d.description.find(needle) != std::string::npos;
      });
      detected += hit;
      c.require(hit, "missed " + entry.at("file").get<std::string>());
      descriptions.insert(entry.at("reported_description").get<std::string>());
    }
    c.require(descriptions.size() >= 12, "only " + std::to_string(descriptions.size()) +
                                             " distinct reported descriptions");
    c.require(detected == labels.at("entries").size(), "detection below 100%");
  });

  criterion("scorer properties", 0, [&](Check &c) {
    std::mt19937 rng(20250101);
    std::uniform_int_distribution<int> count(0, 12);
    for (int i = 0; i < kScorerCases && c.ok; ++i) {
      std::vector<Diagnostic> diags;
      for (int k = count(rng); k > 0; --k)
        diags.push_back(random_diagnostic(rng));
      auto s = score_iteration(diags);
      int t = s.tenths();
      c.require(t >= 0 && t <= 10, "score out of range");
      c.require(s.score == t / 10.0, "score is not a multiple of 0.1");
      c.require(t == oracle_tenths(diags), "score differs from the reference formula");
      bool penalized = std::any_of(diags.begin(), diags.end(), [](const Diagnostic &d) {
        return d.penalty_class != PenaltyClass::None;
      });
      c.require((t == 10) == !penalized, "1.0 without penalized diagnostics violated");
      auto more = diags;
      more.push_back(random_diagnostic(rng));
      c.require(score_iteration(more).tenths() <= t, "adding a diagnostic raised the score");
    }
    for (int n = 5; n <= 9; ++n) {
      std::vector<Diagnostic> diags;
      for (int k = 0; k < n; ++k) {
        Diagnostic d;
        d.taxonomy_leaf = TaxonomyLeaf::APIKnowledgeConflict;
        d.penalty_class = PenaltyClass::ExecError;
        d.source_stage = SourceStage::Resolve;
        d.description = "error " + std::to_string(k);
        diags.push_back(d);
      }
      c.require(score_iteration(diags).tenths() == 0, "no clamp at " + std::to_string(n));
    }
  });

  criterion("catalog properties", 0, [&](Check &c) {
    auto catalog = load_catalog_file(fixture("appendix.vss"));
    auto appendix = read_lines(fixture("appendix_signals.txt"));
    c.require(appendix.size() == 21, "appendix list has " + std::to_string(appendix.size()));
    auto paths = catalog.paths();
    std::set<std::string> members(paths.begin(), paths.end());
    std::vector<std::string> probes = appendix;
    for (const auto &p : appendix) {
      probes.push_back(p + "X");
      probes.push_back(p.substr(0, p.size() - 1));
      std::string lower = p;
      std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
      probes.push_back(lower);
    }
    for (const auto &p : probes)
      c.require((catalog.resolve(p) != nullptr) == (members.count(p) > 0), "resolve mismatch " + p);
    for (const auto &p : appendix)
      c.require(catalog.resolve(p) != nullptr, "appendix path missing " + p);
    for (const auto &p : paths) {
      auto top = catalog.nearest(p, 1);
      c.require(top.size() == 1 && top[0].path == p && top[0].distance == 0.0,
                "nearest(p,1) != (p,0) for " + p);
    }
    std::string query = "Vehicle.Body.Windshield.Front.Wiping.SystemState";
    auto first = catalog.nearest(query, 3);
    c.require(first == catalog.nearest(query, 3), "nearest is not deterministic");
    std::vector<std::pair<double, std::string>> oracle;
    for (const auto &p : paths)
      oracle.emplace_back(brute_distance(query, p), p);
    std::sort(oracle.begin(), oracle.end());
    const std::string system = "Vehicle.Body.Windshield.Front.Wiping.System";
    c.require(!first.empty() && first[0].path == oracle[0].second,
              "top result differs from the brute-force oracle");
    c.require(!first.empty() && std::abs(first[0].distance - oracle[0].first) < kDistanceTolerance,
              "top distance differs from the brute-force oracle");
    c.require(!first.empty() && (first[0].path == system || starts_with(first[0].path, system + ".")),
              "top result outside the Wiping.System subtree: " +
                  (first.empty() ? std::string("<none>") : first[0].path));
  });

  criterion("replay determinism, no network", 0, [&](Check &c) {
    const std::vector<std::string> configs = {"replay/actuator_repair/config.json", "replay/type_repair/config.json",
                                              "replay/refused_repair/config.json",
                                              "replay/never_parses/config.json"};
    Tripwire local;
    for (const auto &config : configs) {
      auto a = render_report(replay(config, local.factory()), ReportFormat::Json);
      auto b = render_report(replay(config, local.factory()), ReportFormat::Json);
      c.require(a == b, "library replay differs for " + config);
      int sa = 0, sb = 0;
      std::string cmd = std::string(HALBENCH_CLI) + " replay --config " + fixture(config) + " 2>/dev/null";
      auto ca = capture_command(cmd, sa);
      auto cb = capture_command(cmd, sb);
      c.require(!ca.empty() && ca == cb, "CLI replay output differs for " + config);
      c.require(sa == sb, "CLI exit status differs for " + config);
    }
    c.require(local.factory_calls == 0 && local.post_calls == 0,
              "replay touched the transport");
    c.require(tripwire.factory_calls == 0 && tripwire.post_calls == 0,
              "an earlier replay touched the transport");

    // The tripwire must fire when a network provider is actually used.
    auto dir = fs::temp_directory_path() / "halbench-acceptance-record";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto config = load_run_configs(fixture("replay/actuator_repair/config.json")).at(0);
    config.gateway_mode = GatewayMode::Record;
    config.transcript_ref = (dir / "transcript.jsonl").string();
    config.provider.openai.credential_env = "HALBENCH_ACCEPTANCE_FAKE_KEY";
    ::setenv("HALBENCH_ACCEPTANCE_FAKE_KEY", "not-a-key", 1);
    Tripwire control;
    bool threw = false;
    try {
      run_experiment(config, control.factory());
    } catch (const Error &) {
      threw = true;
    }
    c.require(threw && control.factory_calls == 1 && control.post_calls >= 1,
              "control run did not reach the transport");
    fs::remove_all(dir);
  });

  std::printf("%s: %d failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
