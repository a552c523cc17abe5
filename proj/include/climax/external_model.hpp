#ifndef CLIMAX_EXTERNAL_MODEL_HPP
#define CLIMAX_EXTERNAL_MODEL_HPP

// Line-delimited JSON over a child process's stdin/stdout.
//
//   -> {"hello": true}
//   <- {"classes": C}                       (optionally "features": d)
//   -> {"id": 7, "instances": [[x, ...], ...]}
//   <- {"id": 7, "probabilities": [[p, ...], ...]}
//
// Floats are written with 17 significant digits so that a double survives
// the round trip unchanged.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>

#include "climax/blackbox.hpp"
#include "json.hpp"

namespace climax {

struct ExternalModelSpec {
  std::string command;  // run through /bin/sh -c
  int num_classes = 2;
  int timeout_ms = 10000;
};

namespace protocol {

inline void append_rows(std::string& out, const Matrix& m) {
  out += '[';
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) out += ", ";
    out += '[';
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += format_double(m(i, j));
    }
    out += ']';
  }
  out += ']';
}

inline std::string request_line(long long id, const Matrix& instances) {
  std::string s = "{\"id\": " + std::to_string(id) + ", \"instances\": ";
  append_rows(s, instances);
  return s + "}";
}

inline std::string response_line(long long id, const Matrix& probabilities) {
  std::string s = "{\"id\": " + std::to_string(id) + ", \"probabilities\": ";
  append_rows(s, probabilities);
  return s + "}";
}

/// Parses a JSON array of equal-length numeric arrays. Returns false on any
/// shape or type problem.
inline bool parse_rows(const nlohmann::json& j, Matrix& out) {
  if (!j.is_array()) return false;
  const auto rows = static_cast<Index>(j.size());
  Index cols = rows ? -1 : 0;
  for (const auto& row : j) {
    if (!row.is_array()) return false;
    if (cols < 0) cols = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != cols) return false;
  }
  out.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) {
      const auto& v = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      if (!v.is_number()) return false;
      out(i, k) = v.get<double>();
    }
  return true;
}

}  // namespace protocol

/// Answers protocol requests from `in` with `model` until end of input.
/// Malformed requests get an {"error": ...} line. Returns the number of
/// batches served.
inline long serve_stdio(const ProbabilityModel& model, std::istream& in, std::ostream& out) {
  long served = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      out << R"({"error": "malformed request"})" << '\n' << std::flush;
      continue;
    }
    if (req.contains("hello")) {
      out << "{\"classes\": " << model.num_classes();
      if (model.num_features() >= 0) out << ", \"features\": " << model.num_features();
      out << "}\n" << std::flush;
      continue;
    }
    Matrix batch;
    if (!req.contains("id") || !req.contains("instances") || !protocol::parse_rows(req["instances"], batch)) {
      out << R"({"error": "request needs id and instances"})" << '\n' << std::flush;
      continue;
    }
    const long long id = req["id"].get<long long>();
    try {
      out << protocol::response_line(id, model.predict_proba(batch)) << '\n' << std::flush;
      ++served;
    } catch (const std::exception& e) {
      nlohmann::json err = {{"id", id}, {"error", e.what()}};
      out << err.dump() << '\n' << std::flush;
    }
  }
  return served;
}

/// Probability model served by a child process. Calls are serialized on an
/// internal mutex; concurrent callers queue.
class ExternalModel : public ProbabilityModel {
 public:
  explicit ExternalModel(ExternalModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.num_classes < 2) throw ConfigError("external model must declare >= 2 classes");
    spawn();
    try {
      handshake();
    } catch (...) {
      shutdown();
      throw;
    }
  }

  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  ~ExternalModel() override { shutdown(); }

  int num_classes() const override { return spec_.num_classes; }
  Index num_features() const override { return features_; }

 protected:
  Matrix predict_batch(const Matrix& batch) const override {
    std::lock_guard<std::mutex> lock(mu_);
    const long long id = ++next_id_;
    write_line(protocol::request_line(id, batch));
    const nlohmann::json resp = read_json();
    if (resp.contains("error")) fail("host reported error: " + resp["error"].dump());
    if (!resp.contains("id") || !resp["id"].is_number_integer() || resp["id"].get<long long>() != id)
      fail("response id does not match request " + std::to_string(id));
    Matrix probs;
    if (!resp.contains("probabilities") || !protocol::parse_rows(resp["probabilities"], probs))
      fail("response lacks a well-formed probabilities array");
    if (probs.rows() != batch.rows())
      fail("expected " + std::to_string(batch.rows()) + " rows, got " + std::to_string(probs.rows()));
    if (probs.cols() != spec_.num_classes)
      fail("expected rows of width " + std::to_string(spec_.num_classes) + ", got " +
           std::to_string(probs.cols()));
    try {
      validate_simplex(probs);
    } catch (const ModelUnavailable& e) {
      fail(e.what());
    }
    return probs;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    drain_stderr(0);
    std::string msg = why + " (command: " + spec_.command + ")";
    if (!stderr_buf_.empty()) msg += "; host stderr: " + stderr_buf_;
    throw ModelUnavailable(msg);
  }

  void spawn() {
    ::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe(in_pipe) || ::pipe(out_pipe) || ::pipe(err_pipe))
      throw ModelUnavailable(std::string("pipe: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) throw ModelUnavailable(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::dup2(err_pipe[1], STDERR_FILENO);
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
      ::execl("/bin/sh", "sh", "-c", spec_.command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    err_child_ = err_pipe[0];
    ::fcntl(err_child_, F_SETFL, ::fcntl(err_child_, F_GETFL) | O_NONBLOCK);
  }

  void handshake() {
    write_line(R"({"hello": true})");
    const nlohmann::json resp = read_json();
    if (!resp.contains("classes") || !resp["classes"].is_number_integer())
      fail("handshake reply lacks an integer 'classes' field");
    const int classes = resp["classes"].get<int>();
    if (classes != spec_.num_classes)
      fail("host serves " + std::to_string(classes) + " classes, expected " +
           std::to_string(spec_.num_classes));
    if (resp.contains("features") && resp["features"].is_number_integer())
      features_ = resp["features"].get<Index>();
  }

  void write_line(std::string line) const {
    line += '\n';
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = ::write(to_child_, line.data() + off, line.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail(std::string("write to host failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
  }

  void drain_stderr(int wait_ms) const {
    if (err_child_ < 0) return;
    pollfd p{err_child_, POLLIN, 0};
    if (wait_ms > 0) ::poll(&p, 1, wait_ms);
    char buf[512];
    for (;;) {
      const ssize_t r = ::read(err_child_, buf, sizeof buf);
      if (r <= 0) break;
      if (stderr_buf_.size() < 4096) stderr_buf_.append(buf, static_cast<std::size_t>(r));
    }
  }

  std::string read_line() const {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::milliseconds(spec_.timeout_ms);
    for (;;) {
      const auto nl = out_buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = out_buf_.substr(0, nl);
        out_buf_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) fail("timed out after " + std::to_string(spec_.timeout_ms) + " ms");
      pollfd fds[2] = {{from_child_, POLLIN, 0}, {err_child_, POLLIN, 0}};
      const int rc = ::poll(fds, 2, static_cast<int>(left));
      if (rc < 0 && errno == EINTR) continue;
      if (fds[1].revents & POLLIN) drain_stderr(0);
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[65536];
        const ssize_t r = ::read(from_child_, buf, sizeof buf);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) {
          drain_stderr(100);
          fail("host closed its output");
        }
        out_buf_.append(buf, static_cast<std::size_t>(r));
      }
    }
  }

  nlohmann::json read_json() const {
    const std::string line = read_line();
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("malformed response line: " + line.substr(0, 200));
    return j;
  }

  void shutdown() {
    if (to_child_ >= 0) ::close(to_child_);
    to_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
          pid_ = -1;
          break;
        }
        ::usleep(10000);
      }
      if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
      }
    }
    for (int* fd : {&from_child_, &err_child_})
      if (*fd >= 0) {
        ::close(*fd);
        *fd = -1;
      }
  }

  ExternalModelSpec spec_;
  Index features_ = -1;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int err_child_ = -1;
  mutable long long next_id_ = 0;
  mutable std::string out_buf_;
  mutable std::string stderr_buf_;
  mutable std::mutex mu_;
};

}  // namespace climax

#endif  // CLIMAX_EXTERNAL_MODEL_HPP
