#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uqr/uqr.h"

namespace {

constexpr int kExitUsage = 1;

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "uqr: error: %s\n", message.c_str());
  return code;
}

int check(uqr_status status) {
  if (status == UQR_OK) return 0;
  return fail(static_cast<int>(status), uqr_last_error());
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::string default_labels(const std::string& image) {
  const auto dot = image.rfind('.');
  const auto slash = image.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return image + ".lbl";
  return image.substr(0, dot) + ".lbl";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image quality estimation from heteroscedastic reconstruction uncertainty", "uqr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", uqr_version());
  const std::string defaults = std::string("\nDefault config (every key optional, unknown keys rejected):\n") +
                               uqr_default_config();

  std::string out;
  std::uint64_t seed = 1;

  auto* simulate = app.add_subcommand("simulate", "Write synthetic phantoms and their label maps");
  std::size_t phantoms = 0;
  std::string sim_config;
  simulate->add_option("--phantoms", phantoms, "Number of phantoms")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "First phantom seed; seeds are consecutive")->capture_default_str();
  simulate->add_option("--config", sim_config, "Config or manifest; its phantom section is used")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->footer(defaults);

  auto* corrupt = app.add_subcommand("corrupt", "Apply a corruption recipe or a noise ladder to an image");
  std::string image, recipe;
  bool ladder = false;
  double snr_start = 10.0, snr_end = -10.0;
  std::size_t levels = 41;
  corrupt->add_option("--image", image, "Input image (UQG1)")->required()->check(CLI::ExistingFile);
  auto* recipe_opt = corrupt->add_option("--recipe", recipe, "Recipe file")->check(CLI::ExistingFile);
  auto* ladder_flag = corrupt->add_flag("--ladder", ladder, "Write a Rician noise ladder instead of a recipe");
  recipe_opt->excludes(ladder_flag);
  corrupt->add_option("--snr-start", snr_start, "Ladder start SNR in dB")->capture_default_str();
  corrupt->add_option("--snr-end", snr_end, "Ladder end SNR in dB")->capture_default_str();
  corrupt->add_option("--levels", levels, "Ladder level count")->capture_default_str();
  corrupt->add_option("--seed", seed, "Corruption seed")->capture_default_str();
  corrupt->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a reconstruction or multitask model");
  std::string task, train_config;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> iterations;
  bool verbose = false;
  train->add_option("--task", task, "recon or multitask (overrides the config)")
      ->check(CLI::IsMember({"recon", "multitask"}));
  train->add_option("--config", train_config, "Config file or a previous run's manifest")->check(CLI::ExistingFile);
  train->add_option("--seed", train_seed, "Training seed (overrides the config)");
  train->add_option("--iterations", iterations, "Iteration count (overrides the config)");
  train->add_flag("--verbose", verbose, "Print progress to stderr");
  train->add_option("--out", out, "Output directory")->required();
  train->footer(defaults);

  auto* evaluate = app.add_subcommand("evaluate", "Run the ladder or partial-noise protocol");
  std::string protocol, model, mask;
  std::vector<std::string> images, labels;
  double max_overlap = 0.0;
  evaluate->add_option("--protocol", protocol, "ladder or partial")
      ->required()
      ->check(CLI::IsMember({"ladder", "partial"}));
  evaluate->add_option("--model", model, "Checkpoint (UQR1)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--image", images, "Clean image(s); ladder takes exactly one")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--labels", labels, "Label maps for partial (default: image path with .lbl)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--seed", seed, "Corruption seed")->capture_default_str();
  evaluate->add_option("--snr-start", snr_start, "Ladder start SNR in dB")->capture_default_str();
  evaluate->add_option("--snr-end", snr_end, "Ladder end SNR in dB")->capture_default_str();
  evaluate->add_option("--levels", levels, "Ladder level count")->capture_default_str();
  evaluate->add_option("--recipe", recipe, "Partial: steps applied inside the region (default rician 0 dB)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--mask", mask, "Partial: region mask (default bottom quarter)")->check(CLI::ExistingFile);
  evaluate->add_option("--max-overlap", max_overlap, "Partial: tolerated ribbon share of the region")
      ->capture_default_str();
  evaluate->add_option("--out", out, "Output directory")->required();

  auto* qc = app.add_subcommand("qc-score", "Per-image uncertainty statistics");
  qc->add_option("--model", model, "Checkpoint (UQR1)")->required()->check(CLI::ExistingFile);
  qc->add_option("--image", images, "Image(s)")->required()->check(CLI::ExistingFile);
  qc->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Plot the CSV outputs of earlier runs");
  std::vector<std::string> inputs;
  report->add_option("--input", inputs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, e.what());
  }

  if (*simulate) return check(uqr_simulate(phantoms, seed, or_null(sim_config), out.c_str()));

  if (*corrupt) {
    if (ladder) return check(uqr_corrupt_ladder(image.c_str(), snr_start, snr_end, levels, seed, out.c_str()));
    if (recipe.empty()) return fail(kExitUsage, "corrupt: give --recipe FILE or --ladder");
    return check(uqr_corrupt(image.c_str(), recipe.c_str(), seed, out.c_str()));
  }

  if (*train)
    return check(uqr_train(or_null(task), or_null(train_config), train_seed.has_value(), train_seed.value_or(0),
                           iterations.has_value(), iterations.value_or(0), verbose ? 1 : 0, out.c_str()));

  if (*evaluate) {
    if (protocol == "ladder") {
      if (images.size() != 1) return fail(kExitUsage, "evaluate --protocol ladder takes exactly one --image");
      if (!recipe.empty() || !mask.empty() || !labels.empty())
        return fail(kExitUsage, "--recipe, --mask and --labels apply to --protocol partial only");
      return check(uqr_evaluate_ladder(model.c_str(), images[0].c_str(), seed, snr_start, snr_end, levels,
                                       out.c_str()));
    }
    if (labels.empty())
      for (const auto& i : images) labels.push_back(default_labels(i));
    if (labels.size() != images.size())
      return fail(kExitUsage, "evaluate: " + std::to_string(images.size()) + " images but " +
                                  std::to_string(labels.size()) + " label maps");
    const auto ic = c_strings(images), lc = c_strings(labels);
    return check(uqr_evaluate_partial(model.c_str(), ic.data(), lc.data(), ic.size(), or_null(recipe), or_null(mask),
                                      max_overlap, seed, out.c_str()));
  }

  if (*qc) {
    const auto ic = c_strings(images);
    return check(uqr_qc_score(model.c_str(), ic.data(), ic.size(), out.c_str()));
  }

  if (*report) {
    const auto dc = c_strings(inputs);
    return check(uqr_report(dc.data(), dc.size(), out.c_str()));
  }
  return fail(kExitUsage, "no subcommand given");
}
