#include "gwbayes/parallel.hpp"

#include <cstdlib>
#include <string>

namespace gwbayes {

int default_worker_count() {
  if (const char* env = std::getenv("GWBAYES_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace gwbayes
