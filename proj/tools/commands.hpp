#pragma once

// Command-line front end. run() parses arguments, resolves the run
// configuration (defaults, then --config file, then flags), executes one
// stage and maps library errors to stable exit codes.

#include <cstdint>
#include <string>
#include <vector>

#include "wtl/binarize.hpp"
#include "wtl/cnn.hpp"
#include "wtl/completion.hpp"
#include "wtl/config.hpp"
#include "wtl/errors.hpp"
#include "wtl/labelgen.hpp"
#include "wtl/synth.hpp"

namespace wtl::cli {

/// Process exit status. Values are part of the CLI contract.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kFormat = 4,
  kInvalidArgument = 5,
  kNumeric = 6,
  kNoLine = 7,
  kCutFailure = 8,
  kNoClosure = 9,
  kNotClosed = 10,
  kFillFailure = 11,
  kInvalidGroundTruth = 12,
  kEmptyResult = 13,
};

int exit_code(ErrorKind kind);

/// Every setting a command can read. Serialized next to the outputs as
/// run_config.txt, which --config accepts unchanged.
struct RunConfig {
  std::string command;
  std::string image, softmap, weights, predictor, gt_contour, gt_mask;
  std::string mask, contour, wtl, dataset, scenes, name;
  std::string out = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  int count = 1;
  int start_row = -1, start_col = -1, steps = 100, step_size = 1;
  double start_angle = 0;

  CompletionConfig completion;
  BinarizeConfig binarize;
  cnn::TrainConfig train;
  LabelGenConfig labels;
  SceneParams synth;

  /// Binds all persisted keys (everything except the output directory).
  void bind_all(Registry& r);
};

/// Runs one command line (argv[0] is the program name).
int run(const std::vector<std::string>& args);

}  // namespace wtl::cli
