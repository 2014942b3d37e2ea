#include "halbench/errors.hpp"
#include "halbench/sandbox.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

extern char **environ;

namespace halbench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

namespace {

constexpr std::size_t kStderrCap = 1 << 20;
constexpr std::size_t kLineCap = 1 << 16;

class Fd {
public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd &) = delete;
  Fd &operator=(const Fd &) = delete;
  Fd(Fd &&other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd &operator=(Fd &&other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0)
      ::close(fd_);
    fd_ = -1;
  }

private:
  int fd_ = -1;
};

std::pair<Fd, Fd> make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw InfrastructureError(std::string("pipe: ") + std::strerror(errno));
  return {Fd(fds[0]), Fd(fds[1])};
}

class TempDir {
public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "halbench-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
      throw InfrastructureError(std::string("mkdtemp: ") + std::strerror(errno));
    path_ = pattern;
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path &path() const { return path_; }

private:
  fs::path path_;
};

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

/// One guest process: stdio pipes, line framing, process-group lifetime.
class GuestProcess {
public:
  GuestProcess(const ProcessConfig &config, const fs::path &dir,
               const std::vector<std::string> &env_overrides) {
    auto [in_r, in_w] = make_pipe();
    auto [out_r, out_w] = make_pipe();
    auto [err_r, err_w] = make_pipe();
    auto [exec_r, exec_w] = make_pipe();

    std::vector<std::string> args = {config.python, "-u", "guest.py"};
    std::vector<std::string> env;
    for (char **e = environ; *e; ++e) {
      std::string_view entry(*e);
      bool overridden = false;
      for (const auto &o : env_overrides)
        if (entry.substr(0, entry.find('=') + 1) == std::string_view(o).substr(0, o.find('=') + 1))
          overridden = true;
      if (!overridden)
        env.emplace_back(entry);
    }
    env.insert(env.end(), env_overrides.begin(), env_overrides.end());
    std::vector<char *> argv, envp;
    for (auto &a : args)
      argv.push_back(a.data());
    argv.push_back(nullptr);
    for (auto &e : env)
      envp.push_back(e.data());
    envp.push_back(nullptr);
    std::string cwd = dir.string();

    pid_ = ::fork();
    if (pid_ < 0)
      throw InfrastructureError(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::setpgid(0, 0);
      ::dup2(in_r.get(), 0);
      ::dup2(out_w.get(), 1);
      ::dup2(err_w.get(), 2);
      if (::chdir(cwd.c_str()) == 0)
        ::execvpe(argv[0], argv.data(), envp.data());
      int code = errno;
      [[maybe_unused]] auto n = ::write(exec_w.get(), &code, sizeof code);
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    exec_w.reset();
    int code = 0;
    ssize_t n;
    do
      n = ::read(exec_r.get(), &code, sizeof code);
    while (n < 0 && errno == EINTR);
    if (n > 0) {
      reap_blocking();
      throw InfrastructureError("cannot execute '" + config.python + "': " + std::strerror(code));
    }
    stdin_ = std::move(in_w);
    stdout_ = std::move(out_r);
    stderr_ = std::move(err_r);
    ::fcntl(stdout_.get(), F_SETFL, O_NONBLOCK);
    ::fcntl(stderr_.get(), F_SETFL, O_NONBLOCK);
  }

  GuestProcess(const GuestProcess &) = delete;
  GuestProcess &operator=(const GuestProcess &) = delete;

  ~GuestProcess() {
    if (!reaped_) {
      kill_group();
      reap_blocking();
    }
  }

  void send(const std::string &frame) {
    if (!stdin_)
      return;
    std::string line = frame + "\n";
    const char *p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      ssize_t n = ::write(stdin_.get(), p, left);
      if (n < 0 && errno == EINTR)
        continue;
      if (n <= 0) {
        stdin_.reset();
        return;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  void close_stdin() { stdin_.reset(); }

  /// Waits up to timeout_ms for output; returns complete stdout lines read.
  std::vector<std::string> pump(int timeout_ms) {
    std::vector<std::string> lines;
    pollfd fds[2];
    nfds_t count = 0;
    if (stdout_)
      fds[count++] = {stdout_.get(), POLLIN, 0};
    if (stderr_)
      fds[count++] = {stderr_.get(), POLLIN, 0};
    if (count == 0) {
      if (timeout_ms > 0)
        ::poll(nullptr, 0, std::min(timeout_ms, 10));
      return lines;
    }
    int ready = ::poll(fds, count, timeout_ms);
    if (ready <= 0)
      return lines;
    for (nfds_t i = 0; i < count; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR)))
        continue;
      bool is_out = fds[i].fd == stdout_.get();
      drain(is_out ? stdout_ : stderr_, is_out ? out_buffer_ : stderr_text_, is_out);
    }
    std::size_t start = 0;
    for (std::size_t nl; (nl = out_buffer_.find('\n', start)) != std::string::npos; start = nl + 1)
      lines.push_back(out_buffer_.substr(start, nl - start));
    out_buffer_.erase(0, start);
    if (out_buffer_.size() > kLineCap) {
      lines.push_back(out_buffer_);
      out_buffer_.clear();
    }
    if (!stdout_ && !out_buffer_.empty()) {
      lines.push_back(out_buffer_);
      out_buffer_.clear();
    }
    return lines;
  }

  bool stdout_open() const { return static_cast<bool>(stdout_); }
  bool streams_open() const { return stdout_ || stderr_; }

  bool exited() {
    if (reaped_)
      return true;
    siginfo_t info{};
    return ::waitid(P_PID, static_cast<id_t>(pid_), &info, WEXITED | WNOHANG | WNOWAIT) == 0 &&
           info.si_pid == pid_;
  }

  void kill_group() {
    if (!reaped_)
      ::kill(-pid_, SIGKILL);
  }

  void reap_blocking() {
    if (reaped_)
      return;
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    reaped_ = true;
    if (WIFEXITED(status))
      exit_status_ = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
      term_signal_ = WTERMSIG(status);
  }

  std::optional<int> exit_status() const { return exit_status_; }
  std::optional<int> term_signal() const { return term_signal_; }
  std::string &stderr_text() { return stderr_text_; }

private:
  void drain(Fd &fd, std::string &sink, bool unbounded) {
    char chunk[8192];
    for (;;) {
      ssize_t n = ::read(fd.get(), chunk, sizeof chunk);
      if (n > 0) {
        if (unbounded || sink.size() < kStderrCap)
          sink.append(chunk, static_cast<std::size_t>(n));
        continue;
      }
      if (n < 0 && errno == EINTR)
        continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK))
        return;
      fd.reset();
      return;
    }
  }

  pid_t pid_ = -1;
  bool reaped_ = false;
  Fd stdin_, stdout_, stderr_;
  std::string out_buffer_, stderr_text_;
  std::optional<int> exit_status_, term_signal_;
};

/// Broker state for one run: signal values, tick clock, event log.
class Session {
public:
  Session(GuestProcess &guest, const Scenario &scenario, const RunContext &context)
      : guest_(guest), scenario_(scenario), context_(context), values_(scenario.initial_values) {
    std::int64_t due = 0;
    for (const auto &e : scenario.events) {
      due += e.delay_ticks;
      schedule_.emplace_back(due, &e);
    }
    last_event_tick_ = schedule_.empty() ? 0 : schedule_.back().first;
  }

  std::vector<BrokerEvent> &log() { return log_; }
  bool passed() const { return passed_; }
  std::int64_t tick() const { return tick_; }
  bool handshake_done() const { return handshake_done_; }

  void send(BrokerEvent e) {
    e.direction = Direction::Harness;
    e.tick = tick_;
    guest_.send(encode_event(e));
    log_.push_back(std::move(e));
  }

  void start_tick(std::int64_t tick) {
    tick_ = tick;
    while (next_event_ < schedule_.size() && schedule_[next_event_].first <= tick_) {
      const auto *event = schedule_[next_event_++].second;
      values_[event->path] = event->value;
      BrokerEvent update;
      update.op = EventOp::SignalUpdate;
      update.path = event->path;
      update.value = event->value;
      send(std::move(update));
      anchor_tick_ = tick_;
    }
  }

  bool past_deadline() const {
    return next_event_ == schedule_.size() &&
           tick_ > last_event_tick_ + scenario_.expectation.deadline_ticks;
  }

  void receive(const std::string &line) {
    BrokerEvent e = decode_event(line);
    e.direction = Direction::Guest;
    e.tick = tick_;
    if (e.op != EventOp::ProtocolViolation && !is_guest_op(e.op)) {
      e.message = "unexpected op '" + std::string(to_string(e.op)) + "' from guest";
      e.op = EventOp::ProtocolViolation;
    }
    if (!handshake_done_) {
      if (e.op == EventOp::Hello) {
        if (e.message != std::to_string(kProtocolVersion))
          throw InfrastructureError("guest shim speaks protocol version " + e.message +
                                    ", harness expects " + std::to_string(kProtocolVersion));
        log_.push_back(e);
        send_ack();
        return;
      }
      if (e.op != EventOp::ProtocolViolation) {
        e.message = "'" + std::string(to_string(e.op)) + "' before hello";
        e.op = EventOp::ProtocolViolation;
      }
      log_.push_back(std::move(e));
      return;
    }
    switch (e.op) {
    case EventOp::Hello:
      e.op = EventOp::ProtocolViolation;
      e.message = "repeated hello";
      break;
    case EventOp::Get: {
      BrokerEvent reply;
      reply.op = EventOp::Value;
      reply.path = e.path;
      auto it = values_.find(e.path);
      reply.value = it == values_.end() ? json() : it->second;
      reply.request_id = e.request_id;
      log_.push_back(std::move(e));
      send(std::move(reply));
      return;
    }
    case EventOp::SetTarget:
      if (accepts(e)) {
        values_[e.path] = *e.value;
        if (anchor_tick_ && e.path == scenario_.expectation.path &&
            *e.value == scenario_.expectation.value &&
            tick_ <= *anchor_tick_ + scenario_.expectation.deadline_ticks)
          passed_ = true;
      }
      break;
    default:
      break;
    }
    log_.push_back(std::move(e));
  }

private:
  void send_ack() {
    handshake_done_ = true;
    BrokerEvent ack;
    ack.op = EventOp::HelloAck;
    ack.message = std::to_string(kProtocolVersion);
    ack.tick = tick_;
    ack.direction = Direction::Harness;
    json frame = json::parse(encode_event(ack));
    frame["scenario"] = scenario_.id;
    guest_.send(frame.dump());
    log_.push_back(std::move(ack));
    start_tick(0);
  }

  bool accepts(const BrokerEvent &e) const {
    if (!context_.catalog)
      return true;
    const auto *node = context_.catalog->resolve(e.path);
    return node && node->kind == SignalKind::Actuator;
  }

  GuestProcess &guest_;
  const Scenario &scenario_;
  const RunContext &context_;
  std::map<std::string, json> values_;
  std::vector<std::pair<std::int64_t, const ScenarioEvent *>> schedule_;
  std::size_t next_event_ = 0;
  std::int64_t last_event_tick_ = 0;
  std::optional<std::int64_t> anchor_tick_;
  std::int64_t tick_ = 0;
  bool handshake_done_ = false;
  bool passed_ = false;
  std::vector<BrokerEvent> log_;
};

} // namespace

ProcessExecutor::ProcessExecutor(ProcessConfig config) : config_(std::move(config)) {
  if (config_.quiescence_ms < 1 || config_.max_tick_ms < config_.quiescence_ms ||
      config_.grace_ms < 0)
    throw ConfigError("sandbox timing: need 1 <= quiescence_ms <= max_tick_ms, grace_ms >= 0");
  ignore_sigpipe();
}

RunOutcome ProcessExecutor::run(const std::string &source, const Scenario &scenario,
                                const RunContext &context) {
  return assemble_outcome(capture(source, scenario, context), scenario, context);
}

RunCapture ProcessExecutor::capture(const std::string &source, const Scenario &scenario,
                                    const RunContext &context) {
  TempDir dir;
  {
    std::ofstream out(dir.path() / "guest.py", std::ios::binary);
    out << source;
    if (!out)
      throw InfrastructureError("cannot write guest source to " + dir.path().string());
  }
  std::vector<std::string> env = {
      std::string(kCatalogEnv) + "=" + context.catalog_path,
      std::string(kScenarioEnv) + "=" + scenario.id,
      "PYTHONDONTWRITEBYTECODE=1",
  };
  if (!config_.shim_path.empty()) {
    std::string path = config_.shim_path;
    if (const char *existing = std::getenv("PYTHONPATH"); existing && *existing)
      path += std::string(":") + existing;
    env.push_back("PYTHONPATH=" + path);
  }

  GuestProcess guest(config_, dir.path(), env);
  Session session(guest, scenario, context);
  RunCapture result;

  const auto wall_deadline =
      Clock::now() + std::chrono::milliseconds(static_cast<long>(scenario.wall_timeout_s * 1000));
  const auto quiescence = std::chrono::milliseconds(config_.quiescence_ms);
  const auto max_tick = std::chrono::milliseconds(config_.max_tick_ms);
  auto tick_start = Clock::now();
  auto last_activity = tick_start;
  bool shutdown = false;

  while (guest.stdout_open()) {
    auto now = Clock::now();
    if (now >= wall_deadline) {
      result.timed_out = true;
      break;
    }
    if (session.handshake_done() &&
        (now - last_activity >= quiescence || now - tick_start >= max_tick)) {
      tick_start = last_activity = now;
      session.start_tick(session.tick() + 1);
      if (session.past_deadline()) {
        shutdown = true;
        break;
      }
    }
    int wait_ms = remaining_ms(wall_deadline);
    if (session.handshake_done())
      wait_ms = std::min({wait_ms, remaining_ms(last_activity + quiescence),
                          remaining_ms(tick_start + max_tick)});
    auto lines = guest.pump(std::max(wait_ms, 1));
    for (const auto &line : lines) {
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      session.receive(line);
      last_activity = Clock::now();
    }
    if (session.passed()) {
      shutdown = true;
      break;
    }
  }

  if (result.timed_out) {
    guest.kill_group();
  } else {
    if (shutdown) {
      BrokerEvent stop;
      stop.op = EventOp::Shutdown;
      session.send(std::move(stop));
    }
    guest.close_stdin();
    auto grace = Clock::now() + std::chrono::milliseconds(config_.grace_ms);
    while (!guest.exited() && Clock::now() < grace)
      guest.pump(std::min(remaining_ms(grace), 20));
    guest.kill_group();
  }
  auto drain_deadline = Clock::now() + std::chrono::milliseconds(std::max(config_.grace_ms, 100));
  while (guest.streams_open() && Clock::now() < drain_deadline)
    guest.pump(std::min(remaining_ms(drain_deadline), 20));
  guest.reap_blocking();

  if (!session.handshake_done() && !result.timed_out &&
      guest.stderr_text().find("Traceback (most recent call last):") == std::string::npos) {
    std::string tail = guest.stderr_text().substr(
        guest.stderr_text().size() > 400 ? guest.stderr_text().size() - 400 : 0);
    throw InfrastructureError("guest exited before the shim handshake" +
                              (tail.empty() ? std::string() : ": " + tail));
  }

  result.event_log = std::move(session.log());
  result.exit_status = guest.exit_status();
  result.term_signal = guest.term_signal();
  result.stderr_text = std::move(guest.stderr_text());
  return result;
}

} // namespace halbench
