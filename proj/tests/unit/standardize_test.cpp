#include <doctest.h>

#include "epdet/standardize.hpp"

using namespace epdet;
using V = std::vector<std::string>;

namespace {

std::string join_slash(const V& toks) {
  std::string s;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) s += '/';
    s += toks[i];
  }
  return s;
}

}  // namespace

TEST_CASE("directory aliases") {
  CHECK(standardize_string("C:\\Users\\Alice\\AppData\\Local\\Temp\\abc123.exe") ==
        V{"<userdir>", "appdata", "local", "temp", "abc123", "exe"});
  CHECK(standardize_string("C:\\WINDOWS\\System32\\drivers\\etc\\hosts") ==
        V{"<system32>", "drivers", "etc", "hosts"});
  CHECK(standardize_string("c:/windows/syswow64/ntdll.dll") ==
        V{"<system32>", "ntdll", "dll"});
  CHECK(standardize_string("C:\\Windows\\Temp\\x.tmp") == V{"<tempdir>", "x", "tmp"});
  CHECK(standardize_string("C:\\Windows\\Fonts\\arial.ttf") ==
        V{"<windir>", "fonts", "arial", "ttf"});
  CHECK(standardize_string("C:\\Program Files (x86)\\Vendor\\tool.exe") ==
        V{"<programfiles>", "vendor", "tool", "exe"});
  CHECK(standardize_string("C:\\Program Files\\Vendor\\tool.exe") ==
        V{"<programfiles>", "vendor", "tool", "exe"});
  CHECK(standardize_string("C:\\ProgramData\\cache") == V{"<programdata>", "cache"});
  CHECK(standardize_string("C:\\Documents and Settings\\bob\\x") == V{"<userdir>", "x"});
  // only the leading components alias, and only once
  CHECK(standardize_string("d:/c:/windows/x") == V{"d", "c", "windows", "x"});
  CHECK(standardize_string("c:/users/alice/c:/windows") ==
        V{"<userdir>", "c", "windows"});
}

TEST_CASE("volatile substrings") {
  CHECK(standardize_string("HKLM\\NET\\00:1A:2B:3C:4D:5E\\cfg") ==
        V{"hklm", "net", "<macaddress>", "cfg"});
  CHECK(standardize_string("00-1a-2b-3c-4d-5e") == V{"<macaddress>"});
  // mixed separators are not a MAC; the hex just gets fused by cleanup
  CHECK(standardize_string("00:1a-2b:3c:4d:5e") == V{"001a2b3c4d5e"});
  CHECK(standardize_string("HKU\\S-1-5-21-1004336348-1177238915-682003330-1001\\Software") ==
        V{"hku", "<sid>", "software"});
  CHECK(standardize_string("c:/windows/temp/d41d8cd98f00b204e9800998ecf8427e.tmp") ==
        V{"<tempdir>", "<hash>", "tmp"});
  CHECK(standardize_string("da39a3ee5e6b4b0d3255bfef95601890afd80709") == V{"<hash>"});
  CHECK(standardize_string(
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855") ==
        V{"<hash>"});
  // only 32/40/64 hex chars count as digests
  CHECK(standardize_string("d41d8cd98f00b204e9800998ecf8427") ==
        V{"d41d8cd98f00b204e9800998ecf8427"});
  // 32 digits are a hex run before they are a digit run
  CHECK(standardize_string("01234567890123456789012345678901") == V{"<hash>"});
  CHECK(standardize_string("report-1736899200.log") == V{"report", "<epoch>", "log"});
  CHECK(standardize_string("20240101") == V{"20240101"});
  CHECK(standardize_string("12345678901") == V{"12345678901"});
  CHECK(standardize_string("a1736899200") == V{"a", "<epoch>"});
}

TEST_CASE("cleanup can fuse volatile runs, second scan catches them") {
  CHECK(standardize_string("12345678_90") == V{"<epoch>"});
  CHECK(standardize_string("d41d8cd98f00b204-e9800998ecf8427e") == V{"<hash>"});
}

TEST_CASE("special tokens pass through") {
  CHECK(standardize_string("<userdir>/sub/dir") == V{"<userdir>", "sub", "dir"});
  CHECK(standardize_string("<rare_file_create>") == V{"<rare_file_create>"});
  CHECK(standardize_string("<epoch>/x") == V{"<epoch>", "x"});
}

TEST_CASE("degenerate inputs") {
  CHECK(standardize_string("") == V{});
  CHECK(standardize_string("///") == V{});
  CHECK(standardize_string("...") == V{});
  CHECK(standardize_string("!!! ???") == V{});
  CHECK(standardize_string("C:") == V{"c"});
}

TEST_CASE("idempotence on own output") {
  const char* inputs[] = {
      "C:\\Users\\Alice\\AppData\\Local\\Temp\\abc123.exe",
      "C:\\WINDOWS\\System32\\drivers\\etc\\hosts",
      "HKLM\\NET\\00:1A:2B:3C:4D:5E\\cfg",
      "HKU\\S-1-5-21-1004336348-1177238915-682003330-1001\\Software",
      "c:/windows/temp/d41d8cd98f00b204e9800998ecf8427e.tmp",
      "report-1736899200.log",
      "12345678_90",
      "d41d8cd98f00b204-e9800998ecf8427e",
      "00:1a-2b:3c:4d:5e",
      "Global\\MUTEX-1604857200-x",
      "\\\\server\\share\\file v2.0 (copy).bak",
      "a1736899200",
  };
  for (const char* raw : inputs) {
    V once = standardize_string(raw);
    V twice = standardize_string(join_slash(once));
    CHECK_MESSAGE(once == twice, "not a fixed point for: ", raw);
    for (const std::string& tok : once) {
      CHECK(standardize_string(tok) == V{tok});
    }
  }
}

TEST_CASE("standardize_action keeps the kind") {
  Action a = standardize_action(ActionType::mutex_create, "Global\\Mutex123");
  CHECK(a.kind == ActionType::mutex_create);
  CHECK(a.tokens == V{"global", "mutex123"});
}
