#ifndef SFF_TOOLS_CLI_HPP
#define SFF_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

// Command-line front end. Subcommands:
//   synth        write a seeded synthetic dataset
//   train-vdan   train the embedding network      -> vdan.sskp, vdan_loss.csv
//   train-agent  train the fast-forward agent     -> agent.sskp, agent_returns.csv
//   run          fast-forward videos               -> selections/<id>.txt
//   eval         score selections                  -> <id>.report.txt, <id>.coverage.csv,
//                                                      summary.csv
// Everything is written under --output-dir.
namespace sff::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,  // bad flags, invalid configuration, dimension mismatch
  kDataError = 2,   // missing or malformed input files
  kNumericError = 3,
};

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sff::cli

#endif  // SFF_TOOLS_CLI_HPP
