#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfcr/data.hpp"
#include "sfcr/inference.hpp"
#include "sfcr/simulate.hpp"

namespace sfcr {

inline constexpr const char* kToolVersion = "sfcr 0.1.0";

// ---- Dates --------------------------------------------------------------------
// The model grid is daily; dates are ISO-8601 calendar dates mapped to integer
// day offsets from 1970-01-01.  No time zones, no times of day.

// Strict "YYYY-MM-DD" (zero-padded, valid calendar date); InputError otherwise.
int parse_iso_date(const std::string& text);
std::string format_iso_date(int days_since_epoch);

// ---- Ingestion ------------------------------------------------------------------

// Knobs for turning observation CSVs + GeoJSON into a Dataset.
struct IngestRules {
  // Positivity days whose positive count falls below this are treated as
  // missing (surveillance data too sparse to trust the ratio).
  int min_positives = 5;
  int extension = 21;            // left grid extension; fits set this to max_lag
  std::string id_property = "id";  // GeoJSON feature property holding site ids
  bool allow_geographic = false;   // skip the planar-coordinate guard
};

struct IngestResult {
  Dataset data;
  int day0 = 0;  // days-since-epoch of grid day 0 (earliest date in the files)

  std::string day0_date() const { return format_iso_date(day0); }
};

// Reads y (positivity) and x (log concentration) CSVs plus region geometry.
// CSV format: a header row naming columns site_id, date, value — the y file
// may add positives and tests columns — plain commas, no quoting.  Positivity
// is computed as positives/tests when the value cell is empty, and the
// minimum-positives rule marks sparse days missing.  The day grid spans the
// min..max date across both files.  Errors carry file and line context;
// observations for ids absent from the geometry fail listing every orphan.
IngestResult ingest(const std::string& y_csv, const std::string& x_csv, const std::string& geo,
                    const IngestRules& rules);

// Refuses coordinates that look like geographic degrees (joint bounding box
// inside ±180/±90 with both spans under 10): Hausdorff distances need a
// projected plane.  `allow_geographic` overrides for genuinely small planar
// extents.
void require_planar(const std::vector<Region>& regions, bool allow_geographic);

// ---- Manifests ------------------------------------------------------------------
// Every subcommand writes manifest.json: tool version, command, resolved
// configuration, input digests, output digests, wall-clock timings.  A rerun
// from the same manifest and inputs reproduces every output byte-exactly
// (timings aside).

// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

// ---- Subcommands ----------------------------------------------------------------
// Each cmd_* returns the process exit code (0 on success) and throws the
// error taxonomy on failure; the CLI front end maps exceptions to exit codes
// 2 (input), 3 (config), 4 (sampler).

struct SimulateOptions {
  std::string out_dir;
  int sites = 6;
  int days = 120;
  std::uint64_t seed = 0;
  std::string day0_date = "2020-01-01";
  SimSchedule schedule;
  SimTruth truth;
  Hyperparams hp;
};

// Writes y.csv, x.csv, geo.geojson, truth.json, manifest.json.  The files
// round-trip through ingest to an equal Dataset, and fixed seeds give
// byte-identical outputs.
int cmd_simulate(const SimulateOptions& opt);

struct FitOptions {
  std::string y_csv, x_csv, geo;
  std::string out_dir;
  Hyperparams hp;
  RunConfig run;
  IngestRules rules;     // extension is overridden with hp.max_lag
  int mu_gamma_bins = 30;
};

// Ingests, runs the sampler, and writes lag_posterior.csv, lag_hpd.csv,
// curve_summaries.csv, mu_gamma.csv, ess.csv, per-chain state and draw files,
// and manifest.json.
int cmd_fit(const FitOptions& opt);

// Reconstructs the options of a recorded fit; out_dir is left empty for the
// caller.  Inputs whose digest no longer matches the record are refused.
FitOptions fit_options_from_manifest(const std::string& manifest_path);

struct SummarizeOptions {
  std::vector<std::string> draw_files;  // chain draw stores from one or more fits
  std::string out_dir;
  int mu_gamma_bins = 30;
};

// Regenerates every summary CSV from stored draws without re-sampling.
// Summarizing a fit's own draw files reproduces its summaries byte-for-byte.
int cmd_summarize(const SummarizeOptions& opt);

struct GraphOptions {
  std::string geo;
  std::string out_dir;
  int neighbors = 5;
  double hausdorff_quantile = 0.5;
  double resolution = 0.0;
  std::string id_property = "id";
  bool allow_geographic = false;
};

// Emits the spatial graph for a geometry file: ids.csv, D.csv (symmetrized
// kNN adjacency), Q.csv (CAR precision), manifest.json.
int cmd_graph(const GraphOptions& opt);

// Output directories given as relative paths resolve under $SFCR_OUT_ROOT
// when that variable is set; absolute paths and unset root pass through.
std::string resolve_out_dir(const std::string& dir);

}  // namespace sfcr
