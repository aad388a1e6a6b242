#pragma once

namespace t1moco::runtime {

// Keeps freed image-sized buffers in the heap instead of returning them to
// the OS after every loss evaluation. No-op outside glibc.
void configure_allocator();

}  // namespace t1moco::runtime
