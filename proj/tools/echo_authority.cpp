#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "skylane/gateway/gateway.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pass-through external authority: approves every plan at max(requested, now)"};
  std::string host = "127.0.0.1";
  int port = 8081;
  app.add_option("--host", host, "Gateway host");
  app.add_option("--port", port, "Gateway stream port")->check(CLI::Range(1, 65535));
  CLI11_PARSE(app, argc, argv);
  const char* token = std::getenv("SKYLANE_TOKEN");
  if (!token || !*token) {
    std::cerr << "skylane-echo-authority: SKYLANE_TOKEN is not set\n";
    return 2;
  }
  try {
    skylane::ExternalClient client(host, port, token, skylane::Role::kAuthority, {"plan/submit"});
    std::cerr << "skylane-echo-authority: attached to " << host << ":" << port << "\n";
    client.run(skylane::echo_authority);
  } catch (const std::exception& e) {
    std::cerr << "skylane-echo-authority: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
