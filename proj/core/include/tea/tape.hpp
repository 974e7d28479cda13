#pragma once

#include <functional>
#include <vector>

#include "tea/errors.hpp"
#include "tea/tensor.hpp"

namespace tea {

// Reverse-mode tape. Ops append a closure per recorded node; backward()
// seeds the loss gradient with 1 and replays the closures in reverse.
// A tape is single-use: replaying twice would double-accumulate into
// parameter gradients, so the second backward() throws.
template <typename S>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(const char* op, std::function<void()> backward) {
    nodes_.push_back(Node{op, std::move(backward)});
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void backward(TensorT<S>& loss) {
    if (consumed_) throw TapeError("backward() called twice on the same tape");
    if (loss.numel() != 1)
      throw TapeError("backward() needs a scalar loss, got " + shape_str(loss.shape));
    if (loss.tape_tag != this)
      throw TapeError("loss tensor was not recorded on this tape");
    loss.ensure_grad();
    (*loss.grad)[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->bw();
    consumed_ = true;
  }

 private:
  struct Node {
    const char* op;
    std::function<void()> bw;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

using Tape = TapeT<float>;

template <typename S>
void backward(TapeT<S>& tape, TensorT<S>& loss) {
  tape.backward(loss);
}

}  // namespace tea
