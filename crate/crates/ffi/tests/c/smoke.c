#include <math.h>
#include <stdio.h>
#include <string.h>

#include "lcanet.h"

#define H 16
#define W 16

static int fail(const char *what, LcaStatus s) {
    const char *msg = lca_last_error();
    fprintf(stderr, "%s: status %d: %s\n", what, (int)s, msg ? msg : "(none)");
    return 1;
}

int main(int argc, char **argv) {
    static float clear[H * W * 3], hazy[H * W * 3], out[H * W * 3];
    LcaModel *m = NULL;
    LcaModel *back = NULL;
    LcaStatus s;
    double psnr = 0.0, ssim = 0.0, secs = -1.0;

    for (int i = 0; i < H * W * 3; i++) clear[i] = (float)(i % 29) / 28.0f;

    if ((s = lca_model_init(7, &m)) != LCA_STATUS_OK) return fail("init", s);
    if (lca_model_param_count(m) != 53023) return fail("param_count", LCA_STATUS_OK);
    if ((s = lca_synthesize(clear, H, W, 0.9, 0.6, hazy)) != LCA_STATUS_OK) return fail("synthesize", s);
    if ((s = lca_dehaze(m, hazy, H, W, 0, out, &secs)) != LCA_STATUS_OK) return fail("dehaze", s);
    if (secs < 0.0) return fail("seconds", s);
    if ((s = lca_psnr(clear, hazy, H, W, &psnr)) != LCA_STATUS_OK) return fail("psnr", s);
    if ((s = lca_ssim(clear, clear, H, W, &ssim)) != LCA_STATUS_OK) return fail("ssim", s);
    if (!(psnr > 0.0 && isfinite(psnr)) || fabs(ssim - 1.0) > 1e-9) return fail("metric values", s);

    if (argc > 1) {
        if ((s = lca_model_save(m, argv[1])) != LCA_STATUS_OK) return fail("save", s);
        if ((s = lca_model_load(argv[1], &back)) != LCA_STATUS_OK) return fail("load", s);
        lca_model_free(back);
    }

    s = lca_model_load("/nonexistent/model.lcan", &back);
    if (s != LCA_STATUS_IO || lca_last_error() == NULL) return fail("missing file", s);
    s = lca_dehaze(NULL, hazy, H, W, 0, out, NULL);
    if (s != LCA_STATUS_NULL_POINTER) return fail("null model", s);

    lca_model_free(m);
    printf("ok %s\n", lca_version());
    return 0;
}
