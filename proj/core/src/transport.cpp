#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/bridge.hpp"
#include "fusionkit/error.hpp"
#include "io_util.hpp"

namespace fusionkit {

using nlohmann::json;

namespace {

Error unavailable(const std::string& what) {
  return Error(ErrorCode::kBridgeUnavailable, what);
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw unavailable(fmt::format("write to bridge failed: {}", std::strerror(errno)));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Canonical key for a request line: the parsed object minus its id.
std::string key_of(const json& request) {
  json copy = request;
  copy.erase("id");
  return copy.dump();
}

}  // namespace

ProcessTransport::ProcessTransport(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw unavailable("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw unavailable("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw unavailable("fork() failed");
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessTransport::~ProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ <= 0) return;
  int status = 0;
  using namespace std::chrono_literals;
  const auto deadline = std::chrono::steady_clock::now() + 2s;
  while (std::chrono::steady_clock::now() < deadline) {
    const auto r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_ || r < 0) return;
    std::this_thread::sleep_for(10ms);
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, &status, 0);
}

std::string ProcessTransport::exchange(std::string_view request_line) {
  if (to_child_ < 0) throw unavailable("bridge process is closed");
  std::string line(request_line);
  line.push_back('\n');
  write_all(to_child_, line);
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return out;
    }
    char chunk[65536];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw unavailable(fmt::format("read from bridge failed: {}", std::strerror(errno)));
    }
    if (n == 0) throw unavailable("bridge closed its output before responding");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ReplayTransport::ReplayTransport(const std::filesystem::path& path) {
  load(detail::read_file(path));
}

std::unique_ptr<ReplayTransport> ReplayTransport::from_text(std::string_view jsonl) {
  std::unique_ptr<ReplayTransport> t(new ReplayTransport());
  t->load(jsonl);
  return t;
}

void ReplayTransport::load(std::string_view jsonl) {
  std::size_t line_no = 0;
  while (!jsonl.empty()) {
    const auto nl = jsonl.find('\n');
    const auto line = jsonl.substr(0, nl);
    jsonl.remove_prefix(nl == std::string_view::npos ? jsonl.size() : nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto doc = json::parse(line);
      const auto& req = doc.at("request");
      const auto& resp = doc.at("response");
      if (!req.is_object() || !resp.is_object()) throw std::runtime_error("not objects");
      entries_[key_of(req)].responses.push_back(resp.dump());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformedFile,
                  fmt::format("replay line {}: {}", line_no, e.what()));
    }
  }
}

std::string ReplayTransport::exchange(std::string_view request_line) {
  json req;
  try {
    req = json::parse(request_line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolError, e.what());
  }
  const auto it = entries_.find(key_of(req));
  if (it == entries_.end()) {
    throw unavailable("replay has no response for " + key_of(req));
  }
  auto& entry = it->second;
  const auto& stored = entry.responses[std::min(entry.next, entry.responses.size() - 1)];
  if (entry.next < entry.responses.size()) ++entry.next;
  auto resp = json::parse(stored);
  if (req.contains("id")) resp["id"] = req["id"];
  return resp.dump();
}

RecordingTransport::RecordingTransport(std::unique_ptr<Transport> inner,
                                       std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_) throw unavailable("no transport to record");
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

std::string RecordingTransport::exchange(std::string_view request_line) {
  auto response = inner_->exchange(request_line);
  json entry;
  try {
    entry = {{"request", json::parse(request_line)}, {"response", json::parse(response)}};
  } catch (const json::exception&) {
    // Let the client report the malformed line; nothing sensible to record.
    return response;
  }
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + path_.string());
  out << entry.dump() << '\n';
  return response;
}

}  // namespace fusionkit
