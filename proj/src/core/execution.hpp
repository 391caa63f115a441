#pragma once

namespace r2u3d {

enum class ConvAlgorithm { Direct, Im2col };

/// Process-wide execution settings. Deterministic mode pins kernels to a
/// single worker with a fixed reduction order.
struct ExecutionSettings {
  int threads = 1;
  ConvAlgorithm conv = ConvAlgorithm::Im2col;
};

ExecutionSettings execution_settings();
void set_threads(int threads);
void set_deterministic(bool on);
bool deterministic();
void set_conv_algorithm(ConvAlgorithm algo);

/// Worker count to hand to parallel loops.
int worker_count();

}  // namespace r2u3d
