#pragma once

namespace tea {

// Test hook: when set, conv2d's backward pass accumulates the weight
// gradient with a flipped sign. Exists so the property suite can prove it
// actually detects broken gradients (a negative control); never set it in
// real use.
inline bool g_inject_grad_fault = false;

}  // namespace tea
