#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "gsverse/bundle.hpp"
#include "gsverse/session.hpp"

namespace gsverse {

struct ServeOptions {
  std::string address = "0.0.0.0";
  std::uint16_t port = 8765;  // 0 picks an ephemeral port
  std::optional<std::filesystem::path> record;  // input trace as a replayable script
  const std::atomic<bool>* stop = nullptr;
  std::optional<std::uint64_t> max_frames;
  bool realtime = true;  // pace frames at dt wall time
  // Frames still queued for a client beyond this are dropped for that client.
  std::size_t max_queued_frames = 16;
  SessionOptions session;
  std::function<void(std::uint16_t port)> on_listening;
};

struct ServeReport {
  std::uint64_t frames = 0;
  std::size_t clients = 0;
  GestureScript trace;
};

// Runs the live loop until `stop` is set or max_frames elapse. The first
// client to connect controls; later clients watch until control is free.
// Throws BindFailure when the address cannot be bound.
ServeReport serve(const SceneBundle& bundle, const ServeOptions& options);

}  // namespace gsverse
