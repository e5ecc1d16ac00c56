#pragma once
//
// Dataset-level glue: run trained streams over every video, localize, and
// score against ground truth.
//

#include <string>
#include <vector>

#include "tscn/basemodel.hpp"
#include "tscn/evaluation.hpp"
#include "tscn/localization.hpp"
#include "tscn/synthdata.hpp"

namespace tscn {

enum class ProposalSource { fused, rgb, flow };

std::string to_string(ProposalSource source);

std::vector<ActionProposal> localize_dataset(const StreamModel& rgb, const StreamModel& flow, const Dataset& dataset,
                                             const LocalizationConfig& config,
                                             ProposalSource source = ProposalSource::fused);

EvalReport evaluate_models(const StreamModel& rgb, const StreamModel& flow, const Dataset& dataset,
                           const LocalizationConfig& config, std::span<const double> thresholds,
                           ProposalSource source = ProposalSource::fused);

// Population variance of each video's attention sequence, averaged over videos.
double mean_attention_variance(const StreamModel& model, const Dataset& dataset);

// Throws DataError when a model cannot consume the dataset.
void check_compatible(const StreamModel& model, const Dataset& dataset);

}  // namespace tscn
