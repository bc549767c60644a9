// Writes encoded random messages, one per line, for validation against the
// published JSON schema.

#include <fstream>
#include <iostream>

#include "generators.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: schema_corpus <out.jsonl>\n";
    return 2;
  }
  std::ofstream out(argv[1]);
  tissuelink::testing::Gen gen(8080);
  for (int i = 0; i < 3000; ++i) out << tissuelink::protocol::encode_message(gen.message()) << '\n';
  return out ? 0 : 1;
}
