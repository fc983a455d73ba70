// Regenerates the bundled toy dataset (procedural, public domain).

#include <CLI11.hpp>

#include <iostream>

#include "srmix/error.hpp"
#include "srmix/toy_data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write the procedural toy dataset"};
  srmix::ToyDatasetSpec spec;
  std::string out = "data/toy";
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", spec.seed, "content/noise seed");
  app.add_option("--size", spec.size, "image edge in pixels (multiple of 4)");
  app.add_option("--train", spec.train_pairs, "training pairs");
  app.add_option("--val", spec.val_pairs, "validation pairs");
  app.add_option("--extra", spec.extra_hr, "extra HR-only images");
  app.add_option("--sigma-read", spec.sigma_read, "signal-independent noise std");
  app.add_option("--sigma-shot", spec.sigma_shot, "signal-dependent noise coefficient");
  CLI11_PARSE(app, argc, argv);
  try {
    srmix::write_toy_dataset(out, spec);
  } catch (const srmix::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cout << "wrote " << spec.train_pairs << " train, " << spec.val_pairs << " val pairs and "
            << spec.extra_hr << " extra HR images to " << out << '\n';
  return 0;
}
