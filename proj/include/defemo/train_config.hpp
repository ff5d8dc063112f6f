#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace defemo {

enum class Setup { ClassificationOnly, Cdp, Mlm, CdpMlm };

std::string_view setup_name(Setup s);
// Accepts classification_only, cdp, mlm, cdp_mlm. Throws ConfigError.
Setup parse_setup(std::string_view name);

enum class Task { Primary, Auxiliary };

std::string_view task_name(Task t);

struct TrainConfig {
  Setup setup = Setup::Cdp;
  // Probability of picking the primary task at each iteration.
  double primary_prob = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t max_len = 64;
  double threshold = 0.3;
  std::uint64_t seed = 0;

  bool resample_aux_per_epoch = false;
  // CDP+MLM: also mask IsNotDefinition instances.
  bool mlm_on_negatives = true;
  bool trailing_sep = false;
  std::size_t negatives_per_label = 1;
  double cdp_weight = 1.0;
  double mlm_weight = 1.0;

  // Throws ConfigError.
  void validate() const;

  // classification_only always trains the primary task.
  double effective_primary_prob() const { return setup == Setup::ClassificationOnly ? 1.0 : primary_prob; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace defemo
