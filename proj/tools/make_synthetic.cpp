#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "defemo/data.hpp"
#include "defemo/error.hpp"
#include "defemo/synthetic.hpp"

namespace fs = std::filesystem;
using namespace defemo;

int main(int argc, char** argv) {
  CLI::App app{"Writes the bundled synthetic corpora"};
  fs::path out_dir = "data";
  std::uint64_t seed = 13;
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Corpus seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path syn = out_dir / "synthetic";
    fs::create_directories(syn);
    const auto& full = goemotions_definitions();
    write_definitions(out_dir / "goemotions_definitions.tsv", full);

    SyntheticOptions opts;
    opts.seed = seed;
    opts.num_examples = 1500;
    const auto goemo = make_synthetic_corpus(full, opts);
    write_primary_tsv(syn / "goemo28_train.tsv", goemo.train);
    write_primary_tsv(syn / "goemo28_dev.tsv", goemo.dev);
    write_primary_tsv(syn / "goemo28_test.tsv", goemo.test);

    const auto defs8 = subset_definitions(full, protocol_label_names());
    write_definitions(syn / "goemo8_definitions.tsv", defs8);
    opts.num_examples = 1000;
    const auto small = make_synthetic_corpus(defs8, opts);
    write_primary_tsv(syn / "goemo8_train.tsv", small.train);
    write_primary_tsv(syn / "goemo8_dev.tsv", small.dev);
    write_primary_tsv(syn / "goemo8_test.tsv", small.test);

    const auto defs6 = subset_definitions(full, overfit_label_names());
    write_definitions(syn / "overfit6_definitions.tsv", defs6);
    write_primary_tsv(syn / "overfit6_train.tsv", make_overfit_set(defs6, 32, 5));

    write_target_tsv(syn / "target7.tsv", make_synthetic_target(700, seed + 4));
    std::cerr << "wrote corpora to " << syn.string() << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
