// SPDX-License-Identifier: MIT
// smoothsel: command-line front end for the selection library.
#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "smoothsel/io.hpp"

using namespace smoothsel;

namespace {

constexpr int kOk = 0, kError = 1, kInfeasible = 2, kVerifyFailed = 3;

struct Failure {
  std::string msg;
};

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{"cannot open " + path};
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw Failure{path + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what()};
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{"cannot write " + path};
  out << text;
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

size_t option_k(const Json& doc, size_t fallback) {
  if (doc.contains("options") && doc["options"].contains("k")) return doc["options"]["k"].get<size_t>();
  return fallback;
}

Rat rand_rat(std::mt19937_64& rng, int lo, int hi, int den) {
  std::uniform_int_distribution<int> num(lo * den, hi * den);
  return make_rat(num(rng), den);
}

Json bench(const std::string& suite, uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  Json runs = Json::array();
  auto t0 = std::chrono::steady_clock::now();
  auto sp = JetSpace::make(2, 1);
  for (int t = 0; t < count; ++t) {
    std::uniform_int_distribution<int> sz(2, suite == "cz" ? 20 : 8);
    int npts = sz(rng);
    std::vector<Point> E;
    while (static_cast<int>(E.size()) < npts) {
      Point x{rand_rat(rng, -4, 4, 8)};
      if (suite == "cz") x.push_back(rand_rat(rng, -4, 4, 8));
      if (std::find(E.begin(), E.end(), x) == E.end()) E.push_back(x);
    }
    if (suite == "cz") {
      Frame fr = frame_for(E);
      std::vector<Point> shifted;
      for (auto x : E) {
        for (size_t i = 0; i < x.size(); ++i) x[i] -= fr.origin[i];
        shifted.push_back(x);
      }
      CZDecomposition dec = cz_decompose(fr.Q0, shifted);
      CZReport rep = check_cz_geometry(dec);
      runs.push_back({{"points", npts}, {"leaves", dec.leaves.size()}, {"geometry_ok", rep.ok()}});
    } else if (suite == "select" || suite == "finiteness") {
      RatVec lo, hi;
      for (int i = 0; i < npts; ++i) {
        Rat a = rand_rat(rng, -2, 2, 4), b = rand_rat(rng, 0, 1, 4);
        lo.push_back(a);
        hi.push_back(a + b);
      }
      SelectionProblem p = interval_problem(sp, E, lo, hi);
      if (suite == "select") {
        SelectionResult r = select(p, 3);
        runs.push_back({{"points", npts},
                        {"M0", rat_json(r.M0)},
                        {"M_full", rat_json(r.M_full)},
                        {"ratio", r.ratio ? rat_json(*r.ratio) : Json()},
                        {"verified", r.verification.constraints_ok}});
      } else {
        Json vals = Json::array();
        for (size_t k = 1; k <= 4; ++k) vals.push_back(rat_json(finiteness_functional(p.field(), k).value));
        runs.push_back({{"points", npts}, {"values", vals}});
      }
    } else {
      throw Failure{"unknown suite \"" + suite + "\" (select, finiteness, cz)"};
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {{"suite", suite}, {"seed", seed}, {"runs", runs}, {"elapsed_seconds_approx", secs}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth selection and Whitney extension with exact rational arithmetic"};
  app.require_subcommand(1);

  std::string input, output, result_path, svg, predicate = "simplified", method = "select", suite;
  size_t k = 0, k_min = 1, k_max = 1;
  int l = 0, grid = 9, count = 20, jobs = 1;
  uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "solve a selection problem");
  solve->add_option("--input", input, "problem document")->required();
  solve->add_option("--output", output, "result document")->required();
  solve->add_option("--k", k, "subset size for the finiteness functional (default: options.k or 3)");
  solve->add_option("--method", method, "select or recursive (experimental)");
  solve->add_option("--grid", grid, "grid density for the reported derivative sup");
  solve->add_option("--jobs", jobs, "accepted for compatibility; work is sequential");

  auto* fin = app.add_subcommand("finiteness", "tabulate the finiteness functional over k");
  fin->add_option("--input", input)->required();
  fin->add_option("--k-min", k_min)->required();
  fin->add_option("--k-max", k_max)->required();
  fin->add_option("--output", output)->required();

  auto* ref = app.add_subcommand("refine", "emit the l-th refinement as canonical rows");
  ref->add_option("--input", input)->required();
  ref->add_option("--l", l)->required();
  ref->add_option("--output", output)->required();

  auto* viz = app.add_subcommand("czviz", "draw the decomposition of a problem as SVG");
  viz->add_option("--input", input)->required();
  viz->add_option("--svg", svg)->required();
  viz->add_option("--predicate", predicate)->check(CLI::IsMember({"simplified", "paper"}));

  auto* ver = app.add_subcommand("verify", "recheck a result document");
  ver->add_option("--result", result_path)->required();

  auto* ben = app.add_subcommand("bench", "run a seeded benchmark suite");
  ben->add_option("--suite", suite)->required();
  ben->add_option("--seed", seed)->required();
  ben->add_option("--count", count);
  ben->add_option("--output", output);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      Json doc = read_json(input);
      SolveOptions opts;
      opts.k = k ? k : option_k(doc, 3);
      opts.method = method;
      opts.grid_density = grid;
      Json res = solve_document(doc, opts);
      write_json(output, res);
      if (res["status"] == "infeasible") {
        std::cerr << "infeasible; minimal subset " << res["infeasible_subset"].dump() << "\n";
        return kInfeasible;
      }
      return kOk;
    }
    if (*fin) {
      Json table = finiteness_table(read_json(input), k_min, k_max);
      write_json(output, table);
      if (table.contains("warning")) std::cerr << "warning: " << table["warning"].get<std::string>() << "\n";
      return kOk;
    }
    if (*ref) {
      write_json(output, refine_document(read_json(input), l));
      return kOk;
    }
    if (*viz) {
      ProblemDocument pd = parse_problem(read_json(input));
      if (pd.problem.space->n > 2) throw Failure{"czviz needs n <= 2"};
      SelectionProblem sp = pd.problem;
      Frame fr = frame_for(sp.E);
      std::vector<Point> shifted;
      for (auto x : sp.E) {
        for (size_t i = 0; i < x.size(); ++i) x[i] -= fr.origin[i];
        shifted.push_back(x);
      }
      CZDecomposition dec = predicate == "paper" ? induction_decomposition(sp) : cz_decompose(fr.Q0, shifted);
      write_text(svg, cz_svg(dec, shifted));
      return kOk;
    }
    if (*ver) {
      VerifyOutcome vo = verify_document(read_json(result_path));
      for (const auto& p : vo.passed) std::cout << "pass " << p << "\n";
      if (!vo.ok) {
        std::cout << "FAIL " << vo.failure << "\n";
        return kVerifyFailed;
      }
      std::cout << "verified\n";
      return kOk;
    }
    if (*ben) {
      write_json(output, bench(suite, seed, count));
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.msg << "\n";
  } catch (const Json::exception& e) {
    std::cerr << "error: bad document: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kError;
}
