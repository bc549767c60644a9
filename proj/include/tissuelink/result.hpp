#pragma once

#include <cassert>
#include <type_traits>
#include <utility>
#include <variant>

namespace tissuelink {

template <typename E>
struct Failure {
  E error;
};

template <typename E>
Failure<std::decay_t<E>> fail(E&& e) {
  return {std::forward<E>(e)};
}

/// Value-or-error return for hot paths where exceptions are not wanted
/// (message decoding, per-frame gesture updates).
template <typename T, typename E>
class Result {
 public:
  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Result(Failure<E> f) : storage_(std::in_place_index<1>, std::move(f.error)) {}

  bool ok() const { return storage_.index() == 0; }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    assert(ok());
    return std::get<0>(storage_);
  }
  T& value() & {
    assert(ok());
    return std::get<0>(storage_);
  }
  T&& value() && {
    assert(ok());
    return std::get<0>(std::move(storage_));
  }

  const E& error() const {
    assert(!ok());
    return std::get<1>(storage_);
  }

  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }
  const T& operator*() const& { return value(); }
  T& operator*() & { return value(); }

 private:
  std::variant<T, E> storage_;
};

}  // namespace tissuelink
