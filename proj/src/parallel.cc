#include "photoba/parallel.h"

#include <cstdlib>
#include <string>

namespace photoba {

int DefaultThreadCount() {
  if (const char* env = std::getenv("PHOTOBA_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 1;
}

}  // namespace photoba
