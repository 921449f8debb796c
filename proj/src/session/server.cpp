#include "gsverse/server.hpp"

#include <chrono>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "gsverse/error.hpp"
#include "gsverse/protocol.hpp"

namespace gsverse {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using SharedBytes = std::shared_ptr<const Bytes>;

class Hub;

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, Hub& hub, std::uint64_t id) : ws_(std::move(socket)), hub_(hub), id_(id) {}

  void start();
  void send(SharedBytes bytes, bool droppable);
  void close();
  std::uint64_t id() const { return id_; }

 private:
  void read();
  void write_next();
  void finish();

  websocket::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  std::deque<SharedBytes> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool gone_ = false;
};

// All members are touched on the io thread only, except the input queue.
class Hub {
 public:
  Hub(const SceneBundle& bundle, std::size_t max_queued)
      : bundle_(bundle), max_queued_(max_queued),
        init_(std::make_shared<const Bytes>(protocol::encode(protocol::make_init(bundle)))) {}

  std::size_t max_queued() const { return max_queued_; }
  std::size_t clients_served() const { return served_; }

  void join(const std::shared_ptr<Client>& c) {
    ++served_;
    clients_.push_back(c);
    if (!controller_) controller_ = c->id();
    c->send(init_, false);
  }

  void leave(const std::shared_ptr<Client>& c) {
    std::erase(clients_, c);
    if (controller_ == c->id()) {
      // Grabs die with their owner; the oldest watcher takes over.
      std::lock_guard lock(mutex_);
      for (auto id : owned_) inputs_.push_back(ReleaseAction{id});
      owned_.clear();
      controller_.reset();
      if (!clients_.empty()) controller_ = clients_.front()->id();
    }
  }

  void broadcast(const SharedBytes& bytes, bool droppable) {
    for (const auto& c : clients_) c->send(bytes, droppable);
  }

  void reply_error(const std::shared_ptr<Client>& c, protocol::ErrorKind kind, const std::string& detail) {
    c->send(std::make_shared<const Bytes>(
                protocol::encode(protocol::ErrorFrame{static_cast<std::uint32_t>(kind), detail})),
            false);
  }

  void on_message(const std::shared_ptr<Client>& c, ByteView bytes) {
    protocol::Message msg;
    try {
      msg = protocol::decode(bytes);
    } catch (const Error& e) {
      reply_error(c, protocol::ErrorKind::Malformed, e.what());
      return;
    }
    const auto type = protocol::type_of(msg);
    const bool input = type == protocol::MessageType::GrabInput || type == protocol::MessageType::MoveTarget ||
                       type == protocol::MessageType::Release || type == protocol::MessageType::MacroInput;
    if (!input) {
      reply_error(c, protocol::ErrorKind::Rejected, "clients may only send inputs");
      return;
    }
    if (controller_ != c->id()) {
      reply_error(c, protocol::ErrorKind::NotController, "another client holds control");
      return;
    }
    auto object_ok = [&](std::uint32_t object) {
      if (object < bundle_.objects.size()) return true;
      reply_error(c, protocol::ErrorKind::UnknownObject, "object " + std::to_string(object));
      return false;
    };
    auto owned_ok = [&](std::uint32_t id) {
      if (owned_.contains(id)) return true;
      reply_error(c, protocol::ErrorKind::UnknownGrab, "grab " + std::to_string(id));
      return false;
    };

    Action action;
    if (const auto* g = std::get_if<protocol::GrabInput>(&msg)) {
      if (!object_ok(g->object_id)) return;
      if (g->face_id >= bundle_.objects[g->object_id].mesh.faces.size()) {
        reply_error(c, protocol::ErrorKind::InvalidFace, "face " + std::to_string(g->face_id));
        return;
      }
      const std::uint32_t id = next_grab_++;
      owned_.insert(id);
      action = GrabAction{g->object_id,
                          g->face_id,
                          Eigen::Vector3d(g->bary[0], g->bary[1], g->bary[2]),
                          double(g->stiffness),
                          id,
                          Eigen::Vector3d(g->target[0], g->target[1], g->target[2])};
      c->send(std::make_shared<const Bytes>(protocol::encode(protocol::GrabAck{id})), false);
    } else if (const auto* m = std::get_if<protocol::MoveTarget>(&msg)) {
      if (!owned_ok(m->grab_id)) return;
      action = MoveTargetAction{m->grab_id, Eigen::Vector3d(m->target[0], m->target[1], m->target[2])};
    } else if (const auto* r = std::get_if<protocol::Release>(&msg)) {
      if (!owned_ok(r->grab_id)) return;
      owned_.erase(r->grab_id);
      action = ReleaseAction{r->grab_id};
    } else if (const auto* mac = std::get_if<protocol::MacroInput>(&msg)) {
      const auto kind = macro_kind_from_code(mac->kind);
      if (!kind) {
        reply_error(c, protocol::ErrorKind::Rejected, "macro kind " + std::to_string(mac->kind));
        return;
      }
      if (!object_ok(mac->object_id)) return;
      action = MacroAction{*kind, mac->object_id, mac->params};
    }
    std::lock_guard lock(mutex_);
    inputs_.push_back(std::move(action));
    pending_controller_ = c;
  }

  // Sim thread: everything that arrived since the last boundary.
  std::vector<Action> take_inputs() {
    std::lock_guard lock(mutex_);
    return std::exchange(inputs_, {});
  }

  std::weak_ptr<Client> controller_client() {
    std::lock_guard lock(mutex_);
    return pending_controller_;
  }

  void shutdown() {
    for (const auto& c : std::vector(clients_)) c->close();
  }

 private:
  const SceneBundle& bundle_;
  std::size_t max_queued_;
  SharedBytes init_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::optional<std::uint64_t> controller_;
  std::set<std::uint32_t> owned_;
  std::uint32_t next_grab_ = 0;
  std::size_t served_ = 0;

  std::mutex mutex_;
  std::vector<Action> inputs_;
  std::weak_ptr<Client> pending_controller_;
};

void Client::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.binary(true);
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->hub_.join(self);
    self->read();
  });
}

void Client::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->finish();
      return;
    }
    const auto data = self->buffer_.cdata();
    self->hub_.on_message(self, ByteView(static_cast<const std::uint8_t*>(data.data()), data.size()));
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

void Client::send(SharedBytes bytes, bool droppable) {
  if (gone_ || closing_) return;
  if (droppable && queue_.size() >= hub_.max_queued()) return;
  queue_.push_back(std::move(bytes));
  if (!writing_) write_next();
}

void Client::write_next() {
  writing_ = true;
  ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->finish();
      return;
    }
    self->queue_.pop_front();
    if (!self->queue_.empty()) {
      self->write_next();
      return;
    }
    self->writing_ = false;
    if (self->closing_) self->close();
  });
}

void Client::close() {
  if (gone_) return;
  closing_ = true;
  if (writing_) return;
  gone_ = true;
  ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {
    beast::error_code ignored;
    beast::get_lowest_layer(self->ws_).socket().close(ignored);
  });
  hub_.leave(shared_from_this());
}

void Client::finish() {
  if (gone_) return;
  gone_ = true;
  hub_.leave(shared_from_this());
}

void accept_loop(tcp::acceptor& acceptor, Hub& hub, std::uint64_t& next_id) {
  acceptor.async_accept([&acceptor, &hub, &next_id](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<Client>(std::move(socket), hub, next_id++)->start();
    accept_loop(acceptor, hub, next_id);
  });
}

}  // namespace

ServeReport serve(const SceneBundle& bundle, const ServeOptions& options) {
  net::io_context ioc;
  tcp::acceptor acceptor(ioc);
  beast::error_code ec;
  const auto address = net::ip::make_address(options.address, ec);
  if (ec) throw Error(ErrorCode::BindFailure, "bad address '" + options.address + "'");
  const tcp::endpoint endpoint(address, options.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::BindFailure,
                options.address + ":" + std::to_string(options.port) + ": " + ec.message());
  }

  Session session(bundle, options.session);
  Hub hub(bundle, options.max_queued_frames);
  std::uint64_t next_client = 0;
  accept_loop(acceptor, hub, next_client);
  auto guard = net::make_work_guard(ioc);
  std::thread io([&ioc] { ioc.run(); });
  if (options.on_listening) options.on_listening(acceptor.local_endpoint().port());

  ServeReport report;
  const double dt = session.world().dt;
  const auto stats_period = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(1.0 / dt)));
  const auto start = std::chrono::steady_clock::now();
  std::exception_ptr failure;
  try {
    for (std::uint64_t f = 0;; ++f) {
      if (options.stop && options.stop->load()) break;
      if (options.max_frames && f >= *options.max_frames) break;
      if (f > 0) session.advance();
      const FrameOutput& frame = session.emit();

      const auto t0 = std::chrono::steady_clock::now();
      std::vector<SharedBytes> payloads;
      for (std::uint32_t i = 0; i < frame.vertices.size(); ++i) {
        payloads.push_back(std::make_shared<const Bytes>(
            protocol::encode(protocol::VerticesFrame{frame.frame_index, frame.sim_time, i, frame.vertices[i]})));
      }
      session.add_encode_time(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      net::post(ioc, [&hub, payloads = std::move(payloads)] {
        for (const auto& p : payloads) hub.broadcast(p, true);
      });
      if (f % stats_period == stats_period - 1) {
        const FrameStats s = session.frame_stats();
        auto bytes = std::make_shared<const Bytes>(protocol::encode(protocol::Stats{
            float(s.mean_ms), float(s.p50_ms), float(s.p99_ms), float(s.splats_per_s)}));
        net::post(ioc, [&hub, bytes] { hub.broadcast(bytes, false); });
      }

      // Inputs land between emitted frame f and the step to f+1, the same
      // boundary a script event at t = f*dt fires on.
      for (auto& action : hub.take_inputs()) {
        try {
          session.apply(action);
          report.trace.events.push_back({session.clock(), std::move(action)});
        } catch (const Error& e) {
          auto bytes = std::make_shared<const Bytes>(protocol::encode(
              protocol::ErrorFrame{static_cast<std::uint32_t>(protocol::ErrorKind::Rejected), e.what()}));
          net::post(ioc, [&hub, bytes] {
            if (auto c = hub.controller_client().lock()) c->send(bytes, false);
          });
        }
      }
      report.frames = f + 1;
      if (options.realtime) {
        std::this_thread::sleep_until(start + std::chrono::duration<double>(double(f + 1) * dt));
      }
    }
  } catch (...) {
    failure = std::current_exception();
  }

  net::post(ioc, [&] {
    beast::error_code ignored;
    acceptor.close(ignored);
    hub.shutdown();
  });
  guard.reset();
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (!ioc.stopped() && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ioc.stop();
  io.join();
  report.clients = hub.clients_served();

  if (options.record) {
    std::ofstream out(*options.record);
    out << script_to_json(report.trace, &bundle).dump(2) << "\n";
    if (!out) throw Error(ErrorCode::Io, "cannot write " + options.record->string());
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

}  // namespace gsverse
