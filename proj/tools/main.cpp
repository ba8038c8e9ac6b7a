#include <cstdlib>
#include <string_view>

// Both precision builds of the command set are linked in; WAGF_F64=1 picks
// the double-precision verification build.
namespace wagf::f32::cli {
int run(int argc, char** argv);
}
namespace wagf::f64::cli {
int run(int argc, char** argv);
}

int main(int argc, char** argv) {
  const char* env = std::getenv("WAGF_F64");
  const bool wide = env != nullptr && std::string_view(env) != "" && std::string_view(env) != "0";
  return wide ? wagf::f64::cli::run(argc, argv) : wagf::f32::cli::run(argc, argv);
}
