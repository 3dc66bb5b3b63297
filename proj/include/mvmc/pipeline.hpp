#pragma once

#include <cstdint>
#include <string>

#include "mvmc/association.hpp"
#include "mvmc/dynamics.hpp"
#include "mvmc/kinfit.hpp"
#include "mvmc/metrics.hpp"
#include "mvmc/scenegen.hpp"
#include "mvmc/toml.hpp"
#include "mvmc/tracking.hpp"
#include "mvmc/triangulation.hpp"

namespace mvmc {

/// All knobs of the pipeline, loadable from a flat TOML file section by
/// section. The working directory holds every stage artifact.
struct PipelineConfig {
  std::string work_dir = "out";
  std::uint64_t seed = 0;
  int workers = 0;
  bool verbose = false;

  SceneConfig scene;
  AssociationConfig association;
  FilterConfig filter;
  KinfitConfig kinfit;
  TrackingConfig tracking;
  SimulationParams simulation;
  FootMetricConfig feet;
};

PipelineConfig pipeline_config_from_toml(const TomlTable& table);
TomlTable pipeline_config_to_toml(const PipelineConfig& config);
/// Commented TOML with every default (the print-config output).
std::string annotated_default_config();

/// Stage drivers. Each reads its declared inputs from config.work_dir,
/// writes its outputs there, and drops (stage)_manifest.json (deterministic)
/// plus (stage)_runinfo.json (timing; excluded from reproducibility checks).
void stage_generate(const PipelineConfig& config);
void stage_associate(const PipelineConfig& config);
void stage_triangulate(const PipelineConfig& config);
void stage_kinfit(const PipelineConfig& config);
void stage_dynamics(const PipelineConfig& config);
void stage_evaluate(const PipelineConfig& config);
void stage_plot(const PipelineConfig& config);
void run_pipeline(const PipelineConfig& config);

}  // namespace mvmc
