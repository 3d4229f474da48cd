#include "vtd/subprocess.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vtd/errors.hpp"

namespace vtd {

namespace {

std::string slurp_and_remove(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  std::error_code ec;
  std::filesystem::remove(path, ec);
  return ss.str();
}

std::string temp_capture_path(const char* tag) {
  static std::atomic<uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path();
  std::ostringstream name;
  name << "vtd_" << tag << "_" << ::getpid() << "_" << counter.fetch_add(1);
  return (dir / name.str()).string();
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error("ExecFailed", "empty argv");

  const std::string out_path = temp_capture_path("out");
  const std::string err_path = temp_capture_path("err");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error("ExecFailed", std::string("fork: ") + std::strerror(errno));

  if (pid == 0) {
    const int out_fd = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    const int err_fd = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (out_fd >= 0) ::dup2(out_fd, STDOUT_FILENO);
    if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
    ::execvp(cargv[0], cargv.data());
    // exec failed; 127 mirrors shell behavior for command-not-found
    ::_exit(127);
  }

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR)
      throw Error("ExecFailed", std::string("waitpid: ") + std::strerror(errno));
  }

  ProcessResult r;
  if (WIFEXITED(status)) {
    r.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    r.exit_code = 128 + WTERMSIG(status);
  }
  r.out = slurp_and_remove(out_path);
  r.err = slurp_and_remove(err_path);
  return r;
}

}  // namespace vtd
