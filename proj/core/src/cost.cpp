#include "crlprune/cost.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crlprune/pruning.hpp"

namespace crlprune {

namespace {

std::string cost_request_json(const Network& net, const Masks& masks, const BatchSummary& batch) {
  nlohmann::ordered_json req;
  req["masks"] = masks;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const ConvLayer& l : net.conv_layers()) {
    layers.push_back({{"index", l.spec.index},
                      {"kind", to_string(l.spec.kind)},
                      {"in_channels", l.spec.in_channels},
                      {"num_filters", l.spec.num_filters},
                      {"kernel_size", l.spec.kernel_size},
                      {"stride", l.spec.stride},
                      {"padding", l.spec.padding}});
  }
  req["network"] = {{"conv_layers", layers},
                    {"class_count", net.class_count()},
                    {"parameter_count", net.parameter_count()}};
  req["batch"] = {{"size", batch.size}};
  return req.dump();
}

}  // namespace

CostFunction CostFunction::parse(const std::string& id) {
  CostFunction fn;
  if (id == "param_fraction" || id == "flops_fraction") {
    fn.id_ = id;
    return fn;
  }
  const std::string prefix = "external:";
  if (id.rfind(prefix, 0) == 0 && id.size() > prefix.size()) {
    fn.id_ = id;
    fn.command_ = id.substr(prefix.size());
    return fn;
  }
  throw std::invalid_argument("unknown cost function: " + id +
                              " (expected param_fraction, flops_fraction or external:CMD)");
}

double CostFunction::evaluate(const Network& net, const Masks& masks,
                              const BatchSummary& batch) const {
  if (id_ == "param_fraction") return remaining_param_fraction(net, masks);
  if (id_ == "flops_fraction") return flops_fraction(net, masks);
  const double value = run_external_evaluator(command_, cost_request_json(net, masks, batch));
  if (value < 0.0) {
    throw std::runtime_error("external cost evaluator returned a negative value");
  }
  return value;
}

double run_external_evaluator(const std::string& command, const std::string& input) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw std::runtime_error("external evaluator: pipe failed: " +
                             std::string(std::strerror(errno)));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    throw std::runtime_error("external evaluator: fork failed");
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = write(in_pipe[1], input.data() + written, input.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;  // child may exit without reading everything
    }
    written += static_cast<std::size_t>(n);
  }
  close(in_pipe[1]);

  std::string output;
  char buf[4096];
  for (;;) {
    const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }
  close(out_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("external cost command failed (" + command + "): exit status " +
                             std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }

  try {
    std::size_t pos = 0;
    const double value = std::stod(output, &pos);
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error("external cost command produced no number: '" + output + "'");
  }
}

}  // namespace crlprune
