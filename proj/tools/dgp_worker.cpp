// Worker process for the procs backend.  Speaks the wire protocol on
// stdin/stdout; spawned by the coordinator, not meant to be run by hand.

#include <csignal>
#include <cstdlib>
#include <cstring>

#include <CLI11.hpp>

#include "dgp/worker.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dgp worker process"};
  std::uint32_t partition = 0;
  app.add_option("--partition", partition, "partition index")->required();
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGPIPE, SIG_IGN);
  const char* fail = std::getenv("DGP_WORKER_FAIL");
  return dgp::serve(0, 1, partition, fail && std::strcmp(fail, "1") == 0);
}
