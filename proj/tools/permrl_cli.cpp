// Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 rejected
// configuration or arguments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "permrl/errors.hpp"
#include "permrl/harness/config.hpp"
#include "permrl/harness/reports.hpp"
#include "permrl/harness/run.hpp"
#include "permrl/permset.hpp"
#include "permrl/toydata.hpp"

namespace fs = std::filesystem;
using namespace permrl;
using namespace permrl::harness;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

RunConfig resolve(const Globals& g, const fs::path& fallback = {}, bool out_is_run_dir = false) {
  std::vector<std::string> sets = g.sets;
  if (g.seed) sets.push_back("seed=" + std::to_string(*g.seed));
  if (out_is_run_dir && !g.out.empty()) sets.push_back("out_dir=" + g.out);
  if (!g.config.empty()) return load_config(g.config, sets);
  if (!fallback.empty() && fs::exists(fallback)) return load_config(fallback, sets);
  return make_config(nlohmann::json::object(), sets);
}

void emit(const Globals& g, const std::string& text, const std::string& default_name = {}) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  fs::path path = g.out;
  if (!default_name.empty() && (fs::is_directory(path) || g.out.back() == '/')) {
    fs::create_directories(path);
    path /= default_name;
  } else if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  write_text(path, text);
  std::cerr << "wrote " << path.string() << "\n";
}

curriculum::Task parse_task(const std::string& s) {
  try {
    return curriculum::task_from_string(s);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

fs::path model_file(const fs::path& p) { return fs::is_directory(p) ? p / "model.ckpt" : p; }

fs::path run_dir_of_checkpoint(const fs::path& p) {
  const fs::path dir = fs::is_directory(p) ? p : p.parent_path();
  return dir.parent_path().parent_path();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation curriculum experiments on toy ordering tasks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory or file");
  app.add_option("--set", g.sets, "override a config field, key=value (repeatable)");

  std::function<int()> action;

  auto* gen = app.add_subcommand("gen-perms", "generate a maximal-Hamming permutation set");
  std::size_t n = 4;
  std::size_t size = 24;
  gen->add_option("--n", n, "permutation length")->capture_default_str();
  gen->add_option("--size", size, "number of permutations")->capture_default_str();
  gen->callback([&] {
    action = [&] {
      const auto set = permset::generate_set(n, size, g.seed.value_or(1));
      emit(g, permset::to_json(set));
      std::cerr << "min pairwise hamming " << set.min_pairwise_hamming() << "\n";
      return 0;
    };
  });

  auto* data = app.add_subcommand("make-data", "generate a toy dataset file");
  std::string task_name = "spatial";
  data->add_option("--task", task_name, "spatial or temporal")->capture_default_str();
  data->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g);
      if (g.out.empty()) throw ConfigError("make-data needs --out <file>");
      const auto d = task_dataset(c, parse_task(task_name));
      toydata::save_dataset(d, g.out);
      std::cerr << "wrote " << g.out << " (" << d.train.size() << "/" << d.val.size() << "/" << d.test.size()
                << " samples)\n";
      return 0;
    };
  });

  auto* train = app.add_subcommand("train", "run training in the configured mode");
  train->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g, {}, true);
      const auto summary = cmd_train(c);
      for (const auto& s : summary.stages) {
        std::cout << "stage " << s.stage << ": " << s.episodes << " episodes, " << s.counters.train_steps
                  << " steps, forward passes " << s.counters.forward_pass_total();
        for (const auto& [t, e] : s.final_error) std::cout << ", " << curriculum::to_string(t) << " error " << e;
        std::cout << "\n";
      }
      std::cout << "run directory " << summary.run_dir.string() << "\n";
      return 0;
    };
  });

  auto* eval = app.add_subcommand("eval-nn", "nearest-neighbour retrieval with encoder features");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "model.ckpt or a checkpoint directory")->required();
  eval->add_option("--task", task_name, "spatial or temporal")->capture_default_str();
  eval->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g, run_dir_of_checkpoint(checkpoint) / "config.json");
      const auto rep = cmd_eval_nn(c, model_file(checkpoint), parse_task(task_name));
      emit(g, rep.to_json().dump(2) + "\n", "retrieval.json");
      return 0;
    };
  });

  auto* cmp = app.add_subcommand("compare", "policy vs uniform vs inverse sampling from shared checkpoints");
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  cmp->add_option("--seeds", seeds, "master seeds")->delimiter(',')->capture_default_str();
  cmp->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g);
      const auto res = cmd_compare(c, seeds);
      const std::string summary = res.summary_json().dump(2) + "\n";
      if (!g.out.empty()) {
        fs::create_directories(g.out);
        write_text(fs::path(g.out) / "compare.csv", res.rows_csv());
        write_text(fs::path(g.out) / "summary.json", summary);
      }
      std::cout << summary;
      return 0;
    };
  });

  auto* sel = app.add_subcommand("selection-report", "selection frequency by error quartile and Hamming distance");
  std::string episodes_path;
  sel->add_option("--episodes", episodes_path, "episodes.jsonl of a run")->required();
  sel->callback([&] {
    action = [&] {
      const auto records = read_jsonl(episodes_path);
      const auto quartiles = selection_quartiles(records);
      std::map<std::string, permset::PermutationSet> perms;
      const fs::path dir = fs::path(episodes_path).parent_path();
      for (const char* t : {"spatial", "temporal"}) {
        const fs::path p = dir / (std::string("perms.") + t + ".json");
        if (fs::exists(p)) perms.emplace(t, permset::load_set(p));
      }
      if (g.out.empty()) {
        std::cout << to_csv(quartiles);
      } else {
        fs::create_directories(g.out);
        write_text(fs::path(g.out) / "selection_quartiles.csv", to_csv(quartiles));
        write_text(fs::path(g.out) / "selection_hamming.csv", to_csv(selection_by_hamming(records, perms)));
        std::cerr << "wrote " << g.out << "/selection_{quartiles,hamming}.csv\n";
      }
      const auto totals = quartile_totals(quartiles);
      std::fprintf(stderr, "run totals by quartile (hardest first): %.4f %.4f %.4f %.4f\n", totals[0], totals[1],
                   totals[2], totals[3]);
      return 0;
    };
  });

  auto* heat = app.add_subcommand("error-heatmap", "per-permutation error over validations");
  std::string metrics_path;
  heat->add_option("--metrics", metrics_path, "metrics.jsonl of a run")->required();
  heat->add_option("--task", task_name, "spatial or temporal")->capture_default_str();
  heat->callback([&] {
    action = [&] {
      const auto h = error_heatmap(read_jsonl(metrics_path), parse_task(task_name));
      emit(g, to_csv(h), "error_heatmap_" + task_name + ".csv");
      return 0;
    };
  });

  // Without --run, prints the closed form; the defaults are the large-scale
  // reference configuration.
  auto* cost = app.add_subcommand("cost-report", "validation cost of the curriculum");
  std::string run_dir;
  double val_size = 100, perm_count = 1000, batch = 128, episodes = 90, iterations = 350000;
  cost->add_option("--run", run_dir, "run directory with counters.json");
  cost->add_option("--val-size", val_size)->capture_default_str();
  cost->add_option("--perms", perm_count)->capture_default_str();
  cost->add_option("--batch", batch)->capture_default_str();
  cost->add_option("--episodes", episodes)->capture_default_str();
  cost->add_option("--iterations", iterations)->capture_default_str();
  cost->callback([&] {
    action = [&] {
      nlohmann::ordered_json out;
      if (!run_dir.empty()) {
        out["run"] = cmd_cost_report(run_dir).to_json();
      } else {
        const auto p = closed_form_cost(val_size, perm_count, batch, episodes, iterations);
        out["closed_form"] = {{"val_size", p.val_size}, {"perms", p.perms},           {"batch", p.batch},
                              {"episodes", p.episodes}, {"iterations", p.iterations}, {"V", p.v},
                              {"overhead", p.overhead}};
      }
      emit(g, out.dump(2) + "\n", "cost.json");
      return 0;
    };
  });

  auto* sweep = app.add_subcommand("valsize-sweep", "error spread against validation-set size");
  std::vector<std::size_t> sizes{10, 20, 50, 100, 200};
  std::size_t repeats = 5;
  sweep->add_option("--run", run_dir, "run directory with checkpoints")->required();
  sweep->add_option("--sizes", sizes)->delimiter(',')->capture_default_str();
  sweep->add_option("--repeats", repeats)->capture_default_str();
  sweep->add_option("--task", task_name, "spatial or temporal")->capture_default_str();
  sweep->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g, fs::path(run_dir) / "config.json");
      emit(g, to_csv(valsize_sweep(c, run_dir, parse_task(task_name), sizes, repeats)), "valsize_sweep.csv");
      return 0;
    };
  });

  auto* diag = app.add_subcommand("diagnose-groups", "pairwise KS tests between permutation groups");
  std::size_t groups = 6;
  double alpha = 0.01;
  diag->add_option("--checkpoint", checkpoint, "model.ckpt or a checkpoint directory")->required();
  diag->add_option("--task", task_name, "spatial or temporal")->capture_default_str();
  diag->add_option("--groups", groups)->capture_default_str();
  diag->add_option("--alpha", alpha)->capture_default_str();
  diag->callback([&] {
    action = [&] {
      const RunConfig c = resolve(g, run_dir_of_checkpoint(checkpoint) / "config.json");
      const auto rep = diagnose_groups(c, model_file(checkpoint), parse_task(task_name), groups, alpha);
      emit(g, rep.to_json().dump(2) + "\n", "groups.json");
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return action ? action() : 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
