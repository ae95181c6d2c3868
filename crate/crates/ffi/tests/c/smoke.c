#include <stdio.h>
#include <stdlib.h>

#include "m2m.h"

/* usage: smoke TRAIN TEST; prints segments, bins and the frame count of TRAIN */
int main(int argc, char **argv) {
    if (argc != 3) {
        return 2;
    }
    M2mTransferFunction *tf = NULL;
    if (m2m_tf_build(argv[1], argv[2], M2M_DIRECTION_FORWARD, 100.0, &tf) != M2M_STATUS_OK) {
        fprintf(stderr, "%s\n", m2m_last_error());
        return 1;
    }
    M2mDatasetReader *reader = NULL;
    if (m2m_dataset_open(argv[1], &reader) != M2M_STATUS_OK) {
        fprintf(stderr, "%s\n", m2m_last_error());
        return 1;
    }
    M2mDatasetInfo info;
    m2m_dataset_info(reader, &info);
    size_t len = (size_t)info.axial_len * info.lateral_len;
    float *buf = malloc(len * sizeof(float));
    bool more = true;
    unsigned frames = 0;
    while (m2m_dataset_next(reader, buf, len, &more) == M2M_STATUS_OK && more) {
        frames++;
    }
    if (m2m_dataset_open("/nonexistent/x.m2mrf", &reader) != M2M_STATUS_IO || m2m_last_error() == NULL) {
        return 1;
    }
    printf("%zu %zu %u\n", m2m_tf_n_segments(tf), m2m_tf_n_bins(tf), frames);
    free(buf);
    m2m_dataset_free(reader);
    m2m_tf_free(tf);
    return 0;
}
